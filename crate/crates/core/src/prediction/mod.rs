//! Head-trace ingestion and per-angle viewport prediction: a least-squares
//! baseline and a two-layer GRU trained from scratch.

mod eval;
mod gru;
mod linear;
mod model_io;
mod quaternion;
mod trace;

pub use eval::{
    angle_series, evaluate_predictor, train_gru_predictor, training_windows, AngleReport, GruPredictor, HoldLast,
    LinearPredictor, Oracle, PredictionReport, Predictor,
};
pub use gru::{
    fit_normalization, gru_forward, gru_train, param_count, GruModel, GruTrainConfig, Normalization, TrainReport,
    Window,
};
pub use linear::{angular_error, lr_predict, Angle};
pub use model_io::{decode_models, encode_models, load_models, save_models};
pub use quaternion::{quat_to_viewport, rotation_to_viewport, Quaternion};
pub use trace::{
    format_trace, load_trace, parse_trace, resample_trace, unwrap_yaw, Column, Sample, Trace, TraceFormat,
};

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PredictionError {
    #[error("trace {0:?} has no samples")]
    EmptyTrace(String),
    #[error("trace {user:?}: timestamp {t} at sample {index} does not increase")]
    NonIncreasing { user: String, index: usize, t: f64 },
    #[error("trace {user:?} spans {span} s, resampling needs at least {needed} s")]
    TooShort { user: String, span: f64, needed: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Io(String),
    #[error("quaternion norm {0} is not within 1e-3 of 1")]
    QuaternionNorm(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("training set is empty")]
    EmptyDataset,
    #[error("training loss became NaN in epoch {epoch}")]
    NanLoss { epoch: usize },
    #[error("model file line {line}: {msg}")]
    ModelFormat { line: usize, msg: String },
    #[error("no evaluation windows: traces are shorter than history plus horizon")]
    NoWindows,
    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        source: Box<PredictionError>,
    },
}

impl PredictionError {
    pub(crate) fn in_file(self, path: &Path) -> Self {
        PredictionError::InFile {
            path: path.to_path_buf(),
            source: Box::new(self),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionConfig {
    /// History length `L` in samples.
    pub history: usize,
    /// Horizon `T` in seconds.
    pub horizon: f64,
    /// Hz.
    pub sample_rate: f64,
    /// Radians.
    pub accuracy_threshold: f64,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        PredictionConfig {
            history: 30,
            horizon: 1.0,
            sample_rate: 30.0,
            accuracy_threshold: PI / 6.0,
        }
    }
}

impl PredictionConfig {
    pub fn validate(&self) -> Result<(), PredictionError> {
        if self.history < 2 {
            return Err(PredictionError::Config(format!("history {} < 2", self.history)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(PredictionError::Config(format!("horizon {} must be > 0", self.horizon)));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(PredictionError::Config(format!("sample rate {} must be > 0", self.sample_rate)));
        }
        if !(self.accuracy_threshold >= 0.0) {
            return Err(PredictionError::Config("accuracy threshold must be >= 0".into()));
        }
        if self.horizon_samples() == 0 {
            return Err(PredictionError::Config("horizon is shorter than half a sample".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// Horizon rounded to whole samples.
    pub fn horizon_samples(&self) -> usize {
        (self.horizon * self.sample_rate).round() as usize
    }
}
