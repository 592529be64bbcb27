use rayon::prelude::*;

use super::gru::{gru_forward, gru_train, GruModel, GruTrainConfig, TrainReport, Window};
use super::linear::{angular_error, lr_predict, Angle};
use super::trace::{unwrap_yaw, Trace};
use super::{PredictionConfig, PredictionError};
use crate::geometry::Viewport;

/// Forecasts the orientation `horizon` samples after `samples[now]`.
/// Causal predictors read only `samples[..=now]`.
pub trait Predictor: Send + Sync {
    fn name(&self) -> &str;
    /// Samples of history needed before the first prediction.
    fn history_len(&self) -> usize;
    fn predict(&self, samples: &[Viewport], now: usize, horizon: usize) -> Viewport;
}

fn component(vp: &Viewport, angle: Angle) -> f64 {
    match angle {
        Angle::Yaw => vp.yaw,
        Angle::Pitch => vp.pitch,
        Angle::Roll => vp.roll,
    }
}

/// One angle of a run of viewports, unwrapped if the angle is circular.
pub fn angle_series(vps: &[Viewport], angle: Angle) -> Vec<f64> {
    let raw: Vec<f64> = vps.iter().map(|v| component(v, angle)).collect();
    if angle.is_circular() {
        unwrap_yaw(&raw)
    } else {
        raw
    }
}

fn history_window(samples: &[Viewport], now: usize, len: usize) -> &[Viewport] {
    &samples[now + 1 - len..=now]
}

/// The true future sample; an upper bound for any predictor.
pub struct Oracle;

impl Predictor for Oracle {
    fn name(&self) -> &str {
        "oracle"
    }
    fn history_len(&self) -> usize {
        1
    }
    fn predict(&self, samples: &[Viewport], now: usize, horizon: usize) -> Viewport {
        samples[now + horizon]
    }
}

/// Assumes the head stays where it is.
pub struct HoldLast;

impl Predictor for HoldLast {
    fn name(&self) -> &str {
        "hold"
    }
    fn history_len(&self) -> usize {
        1
    }
    fn predict(&self, samples: &[Viewport], now: usize, _horizon: usize) -> Viewport {
        samples[now]
    }
}

/// Per-angle least-squares extrapolation.
pub struct LinearPredictor {
    pub history: usize,
    /// Sample spacing in seconds.
    pub dt: f64,
}

impl LinearPredictor {
    pub fn new(cfg: &PredictionConfig) -> Self {
        LinearPredictor {
            history: cfg.history,
            dt: cfg.dt(),
        }
    }
}

impl Predictor for LinearPredictor {
    fn name(&self) -> &str {
        "lr"
    }
    fn history_len(&self) -> usize {
        self.history
    }
    fn predict(&self, samples: &[Viewport], now: usize, horizon: usize) -> Viewport {
        let win = history_window(samples, now, self.history);
        let p = |a| lr_predict(&angle_series(win, a), self.dt, horizon as f64 * self.dt, a);
        Viewport::new(p(Angle::Yaw), p(Angle::Pitch), p(Angle::Roll))
    }
}

/// Three independent GRU models, one per angle.
#[derive(Debug, Clone, PartialEq)]
pub struct GruPredictor {
    models: [GruModel; 3],
}

impl GruPredictor {
    /// Takes exactly one model per angle, in any order, all with the same
    /// history length.
    pub fn from_models(models: Vec<GruModel>) -> Result<Self, PredictionError> {
        let mut slots: [Option<GruModel>; 3] = [None, None, None];
        for m in models {
            let i = m.angle as usize;
            if slots[i].replace(m).is_some() {
                return Err(PredictionError::Dimension("two models for the same angle".into()));
            }
        }
        let [Some(y), Some(p), Some(r)] = slots else {
            return Err(PredictionError::Dimension("need one model per angle".into()));
        };
        if y.history != p.history || y.history != r.history {
            return Err(PredictionError::Dimension("per-angle models disagree on history length".into()));
        }
        Ok(GruPredictor { models: [y, p, r] })
    }

    pub fn models(&self) -> &[GruModel] {
        &self.models
    }

    pub fn model(&self, angle: Angle) -> &GruModel {
        &self.models[angle as usize]
    }
}

impl Predictor for GruPredictor {
    fn name(&self) -> &str {
        "gru"
    }
    fn history_len(&self) -> usize {
        self.models[0].history
    }
    fn predict(&self, samples: &[Viewport], now: usize, _horizon: usize) -> Viewport {
        let win = history_window(samples, now, self.history_len());
        let p = |a: Angle| gru_forward(self.model(a), &angle_series(win, a)).expect("history length matches");
        Viewport::new(p(Angle::Yaw), p(Angle::Pitch), p(Angle::Roll))
    }
}

/// Training pairs for one angle: `history` consecutive samples and the value
/// `horizon` samples after the last, every `stride` samples.
pub fn training_windows(traces: &[Trace], angle: Angle, history: usize, horizon: usize, stride: usize) -> Vec<Window> {
    let stride = stride.max(1);
    let mut out = Vec::new();
    for tr in traces {
        let series = angle_series(&tr.viewports(), angle);
        if series.len() < history + horizon {
            continue;
        }
        for start in (0..=series.len() - history - horizon).step_by(stride) {
            out.push(Window {
                history: series[start..start + history].to_vec(),
                target: series[start + history - 1 + horizon],
            });
        }
    }
    out
}

/// Trains the three per-angle models on resampled traces.
pub fn train_gru_predictor(
    traces: &[Trace],
    cfg: &PredictionConfig,
    train: &GruTrainConfig,
) -> Result<(GruPredictor, Vec<TrainReport>), PredictionError> {
    cfg.validate()?;
    let mut models = Vec::new();
    let mut reports = Vec::new();
    for angle in Angle::ALL {
        let windows = training_windows(traces, angle, cfg.history, cfg.horizon_samples(), 1);
        let (m, r) = gru_train(angle, &windows, train)?;
        models.push(m);
        reports.push(r);
    }
    Ok((GruPredictor::from_models(models)?, reports))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngleReport {
    pub angle: Angle,
    /// Fraction of windows with error ≤ the accuracy threshold.
    pub accuracy: f64,
    pub mae: f64,
    /// Absolute errors in ascending order.
    pub errors: Vec<f64>,
}

impl AngleReport {
    fn new(angle: Angle, mut errors: Vec<f64>, threshold: f64) -> Self {
        errors.sort_by(f64::total_cmp);
        let n = errors.len() as f64;
        AngleReport {
            angle,
            accuracy: errors.partition_point(|&e| e <= threshold) as f64 / n,
            mae: errors.iter().sum::<f64>() / n,
            errors,
        }
    }

    pub fn accuracy_at(&self, threshold: f64) -> f64 {
        self.errors.partition_point(|&e| e <= threshold) as f64 / self.errors.len() as f64
    }

    /// `(error, fraction of windows with error ≤ it)` per window.
    pub fn cdf(&self) -> Vec<(f64, f64)> {
        let n = self.errors.len() as f64;
        self.errors.iter().enumerate().map(|(i, &e)| (e, (i + 1) as f64 / n)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionReport {
    pub predictor: String,
    pub windows: usize,
    pub threshold: f64,
    /// Yaw, pitch, roll.
    pub angles: Vec<AngleReport>,
}

impl PredictionReport {
    pub fn angle(&self, angle: Angle) -> &AngleReport {
        &self.angles[angle as usize]
    }
}

/// Scores a predictor on every window of every (resampled) trace.
pub fn evaluate_predictor(
    predictor: &dyn Predictor,
    traces: &[Trace],
    cfg: &PredictionConfig,
) -> Result<PredictionReport, PredictionError> {
    cfg.validate()?;
    let horizon = cfg.horizon_samples();
    let start = predictor.history_len().max(1) - 1;
    let errors: Vec<[f64; 3]> = traces
        .par_iter()
        .flat_map_iter(|tr| {
            let vps = tr.viewports();
            let last = vps.len().saturating_sub(horizon);
            (start..last)
                .map(|now| {
                    let p = predictor.predict(&vps, now, horizon);
                    let t = vps[now + horizon];
                    [angular_error(p.yaw, t.yaw), angular_error(p.pitch, t.pitch), angular_error(p.roll, t.roll)]
                })
                .collect::<Vec<_>>()
        })
        .collect();
    if errors.is_empty() {
        return Err(PredictionError::NoWindows);
    }
    Ok(PredictionReport {
        predictor: predictor.name().to_string(),
        windows: errors.len(),
        threshold: cfg.accuracy_threshold,
        angles: Angle::ALL
            .iter()
            .enumerate()
            .map(|(i, &a)| AngleReport::new(a, errors.iter().map(|e| e[i]).collect(), cfg.accuracy_threshold))
            .collect(),
    })
}
