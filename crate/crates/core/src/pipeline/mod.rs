//! Trace-driven edge-server simulation: predict → cluster → one VBM per
//! group → multicast accounting → client reconstruction and FOV scoring.

mod config;
mod report;

pub use config::{load_sim_config, parse_sim_config};
pub use report::{format_bandwidth_csv, format_quality_csv, format_summary, format_ticks_csv, write_outputs};

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::clustering::{cluster_centers, cluster_users, finite_motion, ClusterAssignment, ClusterConfig, ClusterError, Label, UserState};
use crate::geometry::{remap, reproject, rotation_from_viewport, Rot3, Sampling, Viewport};
use crate::imagery::{frame_path, load_ppm, to_luma, Frame, ImageError, Rect};
use crate::metrics::{bandwidth_summary, mse, parse_encoded_sizes, BandwidthRecord, BandwidthSummary, EncodedSizes, MetricsError, Scheme};
use crate::prediction::{
    load_models, load_trace, resample_trace, GruPredictor, HoldLast, LinearPredictor, Oracle, PredictionConfig,
    PredictionError, Predictor, Trace, TraceFormat,
};
use crate::vbm::{make_vbm, reconstruct, vbm_layout, VbmError, VbmFrame, VbmLayout};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Vbm(#[from] VbmError),
    #[error(transparent)]
    Prediction(#[from] PredictionError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("trace/frame misalignment: {0}")]
    Misaligned(String),
    #[error("no encoded size for frame id {0:?}")]
    MissingEncodedSize(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredictorKind {
    Oracle,
    Hold,
    Linear,
    /// Path to a saved per-angle model file.
    Gru(PathBuf),
}

/// How users are grouped when scoring FOV quality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GroupingRule {
    /// Every user in one multicast group centered at the mean direction.
    Multicast,
    /// DBSCAN on position distance only (ω = 1).
    Position,
    /// DBSCAN on the configured ω blend.
    Joint,
}

impl GroupingRule {
    pub const ALL: [GroupingRule; 3] = [GroupingRule::Multicast, GroupingRule::Position, GroupingRule::Joint];

    pub fn as_str(&self) -> &'static str {
        match self {
            GroupingRule::Multicast => "multicast",
            GroupingRule::Position => "position",
            GroupingRule::Joint => "joint",
        }
    }
}

impl fmt::Display for GroupingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GroupingRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GroupingRule::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown grouping rule {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub frames_dir: PathBuf,
    pub traces: Vec<PathBuf>,
    pub trace_format: TraceFormat,
    /// Frames per second; traces are resampled to this rate.
    pub tick_rate: f64,
    pub prediction: PredictionConfig,
    pub predictor: PredictorKind,
    pub clustering: ClusterConfig,
    pub schemes: Vec<Scheme>,
    /// Grouping rules whose FOV quality is scored.
    pub variants: Vec<GroupingRule>,
    pub sampling: Sampling,
    pub output_dir: PathBuf,
    /// Recorded in the summary; the simulation itself has no random step.
    pub seed: u64,
    pub encoded_sizes: Option<PathBuf>,
    pub max_ticks: Option<usize>,
    pub score_quality: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            frames_dir: PathBuf::new(),
            traces: Vec::new(),
            trace_format: TraceFormat::default(),
            tick_rate: 30.0,
            prediction: PredictionConfig::default(),
            predictor: PredictorKind::Linear,
            clustering: ClusterConfig::default(),
            schemes: Scheme::ALL.to_vec(),
            variants: vec![GroupingRule::Joint],
            sampling: Sampling::Bilinear,
            output_dir: PathBuf::from("sim_out"),
            seed: 0,
            encoded_sizes: None,
            max_ticks: None,
            score_quality: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config { line: 0, msg: m });
        if !(self.tick_rate > 0.0 && self.tick_rate.is_finite()) {
            return bad(format!("tick_rate must be > 0, got {}", self.tick_rate));
        }
        if self.schemes.is_empty() {
            return bad("at least one scheme is required".into());
        }
        if self.traces.is_empty() {
            return bad("at least one trace is required".into());
        }
        if self.prediction.sample_rate != self.tick_rate {
            return bad("prediction sample rate must equal tick_rate".into());
        }
        self.prediction.validate().map_err(|e| PipelineError::Config { line: 0, msg: e.to_string() })?;
        self.clustering.validate().map_err(|e| PipelineError::Config { line: 0, msg: e.to_string() })?;
        Ok(())
    }
}

/// Source of ground-truth frames, indexed from 0.
pub trait FrameSource: Sync {
    fn len(&self) -> usize;
    fn frame(&self, index: usize) -> Result<Frame, PipelineError>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl FrameSource for Vec<Frame> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }
    fn frame(&self, index: usize) -> Result<Frame, PipelineError> {
        Ok(self[index].clone())
    }
}

/// `frame_000001.ppm, frame_000002.ppm, …` in a directory, loaded on demand.
pub struct FrameDir {
    dir: PathBuf,
    count: usize,
}

impl FrameDir {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let dir = dir.as_ref().to_path_buf();
        let mut count = 0;
        while frame_path(&dir, count + 1).is_file() {
            count += 1;
        }
        if count == 0 {
            return Err(PipelineError::Io(format!("{}: no frame_000001.ppm", dir.display())));
        }
        Ok(FrameDir { dir, count })
    }
}

impl FrameSource for FrameDir {
    fn len(&self) -> usize {
        self.count
    }
    fn frame(&self, index: usize) -> Result<Frame, PipelineError> {
        Ok(load_ppm(frame_path(&self.dir, index + 1))?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickStats {
    /// Index of the current sample; the served frame is `tick + horizon`.
    pub tick: usize,
    pub k: usize,
    pub noise: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityRecord {
    pub tick: usize,
    pub user: usize,
    pub variant: GroupingRule,
    pub fov_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub users: Vec<String>,
    pub ticks: Vec<TickStats>,
    pub bandwidth: Vec<BandwidthRecord>,
    pub quality: Vec<QualityRecord>,
    pub summary: BandwidthSummary,
    pub seed: u64,
}

impl SimResult {
    pub fn mean_k(&self) -> f64 {
        self.ticks.iter().map(|t| t.k as f64).sum::<f64>() / self.ticks.len() as f64
    }

    pub fn mean_noise(&self) -> f64 {
        self.ticks.iter().map(|t| t.noise as f64).sum::<f64>() / self.ticks.len() as f64
    }

    /// Mean FOV MSE over all users and ticks for one grouping rule.
    pub fn mean_fov_mse(&self, rule: GroupingRule) -> Option<f64> {
        let v: Vec<f64> = self.quality.iter().filter(|q| q.variant == rule).map(|q| q.fov_mse).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Rotation taking user-centered directions into the cluster-centered frame:
/// `W(cluster)ᵀ · W(user)`.
pub fn relative_rotation(user_vp: &Viewport, cluster_vp: &Viewport) -> Rot3 {
    if user_vp == cluster_vp {
        return Rot3::IDENTITY;
    }
    rotation_from_viewport(cluster_vp).transpose().mul(&rotation_from_viewport(user_vp))
}

/// The user's true FOV: the FOV rectangle of the frame recentered at `vp`.
pub fn true_fov(gt_frame: &Frame, vp: &Viewport, layout: &VbmLayout, sampling: Sampling) -> Frame {
    remap(gt_frame, &rotation_from_viewport(vp), layout.fov_src, sampling)
}

/// The user's FOV rendered from a reconstructed cluster-centered frame.
pub fn rendered_fov(reconstructed: &Frame, user_vp: &Viewport, cluster_vp: &Viewport, fov: Rect, sampling: Sampling) -> Frame {
    remap(reconstructed, &relative_rotation(user_vp, cluster_vp), fov, sampling)
}

fn crop_mse(a: &Frame, b: &Frame) -> Result<f64, PipelineError> {
    Ok(mse(&to_luma(a), &to_luma(b))?)
}

/// Luma MSE between the user's true FOV and the FOV they see when served
/// the VBM made at `cluster_vp`.
pub fn fov_quality_loss(
    user_vp: &Viewport,
    cluster_vp: &Viewport,
    gt_frame: &Frame,
    vbm: &VbmFrame,
    sampling: Sampling,
) -> Result<f64, PipelineError> {
    let layout = &vbm.layout;
    if gt_frame.width() != layout.src_w || gt_frame.height() != layout.src_h {
        return Err(MetricsError::LayoutMismatch(gt_frame.width(), gt_frame.height(), layout.src_w, layout.src_h).into());
    }
    let truth = true_fov(gt_frame, user_vp, layout, sampling);
    let seen = rendered_fov(&reconstruct(vbm)?, user_vp, cluster_vp, layout.fov_src, sampling);
    crop_mse(&truth, &seen)
}

/// One transmitted VBM stream: a cluster or a single noise user.
#[derive(Debug, Clone)]
struct Stream {
    id: String,
    vp: Viewport,
    members: Vec<usize>,
}

fn streams(assign: &ClusterAssignment, predicted: &[Viewport]) -> Vec<Stream> {
    let mut out: Vec<Stream> = assign
        .centers
        .iter()
        .enumerate()
        .map(|(c, vp)| Stream {
            id: format!("c{c}"),
            vp: *vp,
            members: assign.members(c).collect(),
        })
        .collect();
    for (u, l) in assign.labels.iter().enumerate() {
        if *l == Label::Noise {
            out.push(Stream {
                id: format!("u{u}"),
                vp: predicted[u],
                members: vec![u],
            });
        }
    }
    out
}

fn group(rule: GroupingRule, users: &[UserState], cfg: &ClusterConfig) -> Result<ClusterAssignment, PipelineError> {
    Ok(match rule {
        GroupingRule::Joint => cluster_users(users, cfg)?,
        GroupingRule::Position => cluster_users(users, &ClusterConfig { omega: 1.0, ..*cfg })?,
        GroupingRule::Multicast => {
            let labels = vec![Label::Cluster(0); users.len()];
            let centers = cluster_centers(&labels, users);
            ClusterAssignment { labels, centers }
        }
    })
}

/// Frame id used to look up encoded sizes: `tick/scheme/stream`.
pub fn frame_id(tick: usize, scheme: Scheme, stream: &str) -> String {
    format!("{tick}/{scheme}/{stream}")
}

struct Costs<'a> {
    layout: VbmLayout,
    encoded: Option<&'a EncodedSizes>,
}

impl Costs<'_> {
    fn lookup(&self, tick: usize, scheme: Scheme, stream: &str, raw_pixels: usize) -> Result<u64, PipelineError> {
        match self.encoded {
            None => Ok(3 * raw_pixels as u64),
            Some(t) => {
                let id = frame_id(tick, scheme, stream);
                t.get(&id).ok_or(PipelineError::MissingEncodedSize(id))
            }
        }
    }

    fn full(&self) -> usize {
        self.layout.src_pixels()
    }

    /// Two-layer: 4×-downsampled full view plus the full-resolution FOV.
    fn two_layer(&self) -> usize {
        self.full() / 16 + self.layout.fov_src.area()
    }
}

fn per_user_cost(costs: &Costs, tick: usize, scheme: Scheme, n: usize, raw: usize) -> Result<BandwidthRecord, PipelineError> {
    let mut bytes = 0;
    for u in 0..n {
        bytes += costs.lookup(tick, scheme, &format!("u{u}"), raw)?;
    }
    Ok(BandwidthRecord {
        scheme,
        tick,
        bytes,
        recipients: n,
        transmissions: n,
    })
}

/// Loads, resamples and checks the configured traces.
pub fn load_traces(cfg: &SimConfig) -> Result<Vec<Trace>, PipelineError> {
    cfg.traces
        .iter()
        .map(|p| Ok(resample_trace(&load_trace(p, &cfg.trace_format)?, cfg.tick_rate)?))
        .collect()
}

fn make_predictor(cfg: &SimConfig) -> Result<Box<dyn Predictor>, PipelineError> {
    Ok(match &cfg.predictor {
        PredictorKind::Oracle => Box::new(Oracle),
        PredictorKind::Hold => Box::new(HoldLast),
        PredictorKind::Linear => Box::new(LinearPredictor::new(&cfg.prediction)),
        PredictorKind::Gru(path) => {
            let p = GruPredictor::from_models(load_models(path)?)?;
            if p.history_len() != cfg.prediction.history {
                return Err(PipelineError::Config {
                    line: 0,
                    msg: format!("model history {} differs from configured history {}", p.history_len(), cfg.prediction.history),
                });
            }
            Box::new(p)
        }
    })
}

/// Reads frames, traces, model and encoded sizes named by `cfg`, then
/// simulates.
pub fn run_simulation(cfg: &SimConfig) -> Result<SimResult, PipelineError> {
    cfg.validate()?;
    let frames = FrameDir::open(&cfg.frames_dir)?;
    let traces = load_traces(cfg)?;
    let predictor = make_predictor(cfg)?;
    let encoded = match &cfg.encoded_sizes {
        None => None,
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| PipelineError::Io(format!("{}: {e}", p.display())))?;
            Some(parse_encoded_sizes(&text)?)
        }
    };
    simulate(cfg, &frames, &traces, predictor.as_ref(), encoded.as_ref())
}

/// The simulation proper on already-loaded inputs. Traces must be sampled at
/// the tick rate, one sample per frame, starting with frame 0.
pub fn simulate(
    cfg: &SimConfig,
    frames: &dyn FrameSource,
    traces: &[Trace],
    predictor: &dyn Predictor,
    encoded: Option<&EncodedSizes>,
) -> Result<SimResult, PipelineError> {
    cfg.validate()?;
    let n_frames = frames.len();
    if traces.is_empty() {
        return Err(PipelineError::Misaligned("no traces".into()));
    }
    for tr in traces {
        if tr.len() < n_frames {
            return Err(PipelineError::Misaligned(format!(
                "trace {:?} has {} samples at {} Hz but there are {n_frames} frames",
                tr.user_id,
                tr.len(),
                cfg.tick_rate
            )));
        }
    }
    let horizon = cfg.prediction.horizon_samples();
    let first = predictor.history_len().max(2) - 1;
    let mut ticks: Vec<usize> = (first..n_frames.saturating_sub(horizon)).collect();
    if let Some(m) = cfg.max_ticks {
        ticks.truncate(m);
    }
    if ticks.is_empty() {
        return Err(PipelineError::Misaligned(format!(
            "{n_frames} frames leave no tick with {} history samples and a {horizon}-sample horizon",
            first + 1
        )));
    }

    let user_vps: Vec<Vec<Viewport>> = traces.iter().map(|t| t.viewports()).collect();
    let n = traces.len();
    let dt = 1.0 / cfg.tick_rate;
    let probe = frames.frame(0)?;
    let layout = vbm_layout(probe.width(), probe.height())?;
    let costs = Costs { layout, encoded };

    let mut out = SimResult {
        users: traces.iter().map(|t| t.user_id.clone()).collect(),
        ticks: Vec::new(),
        bandwidth: Vec::new(),
        quality: Vec::new(),
        summary: bandwidth_summary(&[])?,
        seed: cfg.seed,
    };

    for &tick in &ticks {
        let target = tick + horizon;
        let frame = frames.frame(target)?;
        if frame.width() != layout.src_w || frame.height() != layout.src_h {
            return Err(PipelineError::Misaligned(format!(
                "frame {target} is {}x{}, expected {}x{}",
                frame.width(),
                frame.height(),
                layout.src_w,
                layout.src_h
            )));
        }
        let predicted: Vec<Viewport> = user_vps.iter().map(|v| predictor.predict(v, tick, horizon)).collect();
        let actual: Vec<Viewport> = user_vps.iter().map(|v| v[target]).collect();
        let users: Vec<UserState> = (0..n)
            .map(|u| UserState {
                user_id: out.users[u].clone(),
                position: predicted[u].direction(),
                motion: finite_motion(&user_vps[u][tick - 1], &user_vps[u][tick], dt),
            })
            .collect();

        let joint = group(GroupingRule::Joint, &users, &cfg.clustering)?;
        let joint_streams = streams(&joint, &predicted);
        out.ticks.push(TickStats {
            tick,
            k: joint.k(),
            noise: joint.noise_count(),
        });

        let vbm_pixels = layout.packed_pixels();
        for &scheme in &cfg.schemes {
            let rec = match scheme {
                Scheme::Evas => {
                    let mut bytes = 0;
                    for s in &joint_streams {
                        bytes += costs.lookup(tick, scheme, &s.id, vbm_pixels)?;
                    }
                    BandwidthRecord {
                        scheme,
                        tick,
                        bytes,
                        recipients: n,
                        transmissions: joint_streams.len(),
                    }
                }
                Scheme::EvasUnicast => per_user_cost(&costs, tick, scheme, n, vbm_pixels)?,
                Scheme::NonViewport => per_user_cost(&costs, tick, scheme, n, costs.full())?,
                Scheme::TwoLayer => per_user_cost(&costs, tick, scheme, n, costs.two_layer())?,
            };
            out.bandwidth.push(rec);
        }

        if !cfg.score_quality || cfg.variants.is_empty() {
            continue;
        }
        let truths: Vec<Frame> = actual
            .par_iter()
            .map(|vp| true_fov(&frame, vp, &layout, cfg.sampling))
            .collect();
        for &rule in &cfg.variants {
            let rule_streams = if rule == GroupingRule::Joint {
                joint_streams.clone()
            } else {
                streams(&group(rule, &users, &cfg.clustering)?, &predicted)
            };
            let mut scores: Vec<(usize, f64)> = rule_streams
                .par_iter()
                .map(|s| -> Result<Vec<(usize, f64)>, PipelineError> {
                    let vbm = make_vbm(&reproject(&frame, &s.vp, cfg.sampling))?;
                    let rec = reconstruct(&vbm)?;
                    s.members
                        .iter()
                        .map(|&u| {
                            let seen = rendered_fov(&rec, &actual[u], &s.vp, layout.fov_src, cfg.sampling);
                            Ok((u, crop_mse(&truths[u], &seen)?))
                        })
                        .collect()
                })
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .flatten()
                .collect();
            scores.sort_by_key(|&(u, _)| u);
            out.quality.extend(scores.into_iter().map(|(user, fov_mse)| QualityRecord {
                tick,
                user,
                variant: rule,
                fov_mse,
            }));
        }
    }
    out.summary = bandwidth_summary(&out.bandwidth)?;
    Ok(out)
}

/// Mean FOV MSE under each grouping rule: one multicast group, position-only
/// clustering, and joint clustering.
pub fn compare_clustering_variants(cfg: &SimConfig) -> Result<Vec<(GroupingRule, f64)>, PipelineError> {
    if cfg.traces.len() < 2 {
        return Err(PipelineError::Config {
            line: 0,
            msg: "comparing grouping rules needs at least two users".into(),
        });
    }
    let cfg = SimConfig {
        variants: GroupingRule::ALL.to_vec(),
        score_quality: true,
        ..cfg.clone()
    };
    let res = run_simulation(&cfg)?;
    variant_table(&res)
}

/// Per-rule mean FOV MSE of a finished run, in [`GroupingRule::ALL`] order.
pub fn variant_table(res: &SimResult) -> Result<Vec<(GroupingRule, f64)>, PipelineError> {
    Ok(GroupingRule::ALL
        .iter()
        .filter_map(|&r| res.mean_fov_mse(r).map(|m| (r, m)))
        .collect())
}
