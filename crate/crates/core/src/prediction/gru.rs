//! Two stacked GRU layers and an affine head, trained with backpropagation
//! through time and plain mini-batch gradient descent.
//!
//! Every angle has its own model. Inputs are the history expressed relative
//! to its last value and the target is the change after the horizon, both
//! standardized with constants fitted on the training set.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::linear::Angle;
use super::PredictionError;

/// Samples per parallel gradient chunk. Fixed so that the summation order,
/// and hence the trained weights, do not depend on the thread count.
const GRAD_CHUNK: usize = 8;

/// Affine standardization of the input deltas and the target delta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub in_mean: f64,
    pub in_scale: f64,
    pub out_mean: f64,
    pub out_scale: f64,
}

impl Normalization {
    pub const IDENTITY: Normalization = Normalization {
        in_mean: 0.0,
        in_scale: 1.0,
        out_mean: 0.0,
        out_scale: 1.0,
    };

    pub fn is_valid(&self) -> bool {
        [self.in_mean, self.out_mean].iter().all(|v| v.is_finite())
            && [self.in_scale, self.out_scale].iter().all(|v| v.is_finite() && *v > 0.0)
    }
}

/// One training example: `history` holds `L` consecutive (unwrapped) values
/// and `target` the value one horizon after the last of them.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub history: Vec<f64>,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruModel {
    pub angle: Angle,
    pub history: usize,
    pub hidden: usize,
    pub norm: Normalization,
    params: Vec<f64>,
}

/// Offsets of the parameter blocks inside the flat vector. Per layer the
/// order is `W_z W_r W_h` (H×I each), `U_z U_r U_h` (H×H), `b_z b_r b_h`,
/// then the head `w_out` (H) and `b_out`.
#[derive(Debug, Clone, Copy)]
struct Layout {
    layer1: usize,
    layer2: usize,
    head: usize,
    total: usize,
}

fn layer_len(input: usize, hidden: usize) -> usize {
    3 * hidden * input + 3 * hidden * hidden + 3 * hidden
}

impl Layout {
    fn new(hidden: usize) -> Self {
        let layer1 = 0;
        let layer2 = layer1 + layer_len(1, hidden);
        let head = layer2 + layer_len(hidden, hidden);
        Layout {
            layer1,
            layer2,
            head,
            total: head + hidden + 1,
        }
    }
}

/// Parameter count of a model with the given hidden size.
pub fn param_count(hidden: usize) -> usize {
    Layout::new(hidden).total
}

/// Activations of one layer over a sequence, kept for the backward pass.
struct LayerTrace {
    hs: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    c: Vec<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn layer_forward(p: &[f64], input: usize, hidden: usize, xs: &[f64], steps: usize) -> LayerTrace {
    let (hi, hh) = (hidden * input, hidden * hidden);
    let (w, rest) = p.split_at(3 * hi);
    let (u, b) = rest.split_at(3 * hh);
    let n = steps * hidden;
    let mut tr = LayerTrace {
        hs: vec![0.0; n],
        z: vec![0.0; n],
        r: vec![0.0; n],
        c: vec![0.0; n],
    };
    let zeros = vec![0.0; hidden];
    let mut rh = vec![0.0; hidden];
    for t in 0..steps {
        let x = &xs[t * input..(t + 1) * input];
        let o = t * hidden;
        let hp: Vec<f64> = if t == 0 { zeros.clone() } else { tr.hs[o - hidden..o].to_vec() };
        for j in 0..hidden {
            let az = b[j] + dot(&w[j * input..(j + 1) * input], x) + dot(&u[j * hidden..(j + 1) * hidden], &hp);
            let ar = b[hidden + j]
                + dot(&w[hi + j * input..hi + (j + 1) * input], x)
                + dot(&u[hh + j * hidden..hh + (j + 1) * hidden], &hp);
            tr.z[o + j] = sigmoid(az);
            tr.r[o + j] = sigmoid(ar);
        }
        for k in 0..hidden {
            rh[k] = tr.r[o + k] * hp[k];
        }
        for j in 0..hidden {
            let ah = b[2 * hidden + j]
                + dot(&w[2 * hi + j * input..2 * hi + (j + 1) * input], x)
                + dot(&u[2 * hh + j * hidden..2 * hh + (j + 1) * hidden], &rh);
            let c = ah.tanh();
            let z = tr.z[o + j];
            tr.c[o + j] = c;
            tr.hs[o + j] = (1.0 - z) * hp[j] + z * c;
        }
    }
    tr
}

/// Accumulates parameter gradients into `g` and returns `dL/dx` per step.
/// `dh_ext` is the loss gradient reaching each hidden state from above.
#[allow(clippy::too_many_arguments)]
fn layer_backward(
    p: &[f64],
    g: &mut [f64],
    input: usize,
    hidden: usize,
    xs: &[f64],
    tr: &LayerTrace,
    dh_ext: &[f64],
    steps: usize,
) -> Vec<f64> {
    let (hi, hh) = (hidden * input, hidden * hidden);
    let (w, rest) = p.split_at(3 * hi);
    let u = &rest[..3 * hh];
    let (gw, grest) = g.split_at_mut(3 * hi);
    let (gu, gb) = grest.split_at_mut(3 * hh);

    let mut dxs = vec![0.0; steps * input];
    let mut dh_next = vec![0.0; hidden];
    let zeros = vec![0.0; hidden];
    let (mut daz, mut dar, mut dah) = (vec![0.0; hidden], vec![0.0; hidden], vec![0.0; hidden]);
    let (mut rh, mut dhp) = (vec![0.0; hidden], vec![0.0; hidden]);
    for t in (0..steps).rev() {
        let o = t * hidden;
        let x = &xs[t * input..(t + 1) * input];
        let hp = if t == 0 { &zeros[..] } else { &tr.hs[o - hidden..o] };
        let (z, r, c) = (&tr.z[o..o + hidden], &tr.r[o..o + hidden], &tr.c[o..o + hidden]);
        let mut dz = vec![0.0; hidden];
        for j in 0..hidden {
            let dh = dh_ext[o + j] + dh_next[j];
            dah[j] = dh * z[j] * (1.0 - c[j] * c[j]);
            dz[j] = dh * (c[j] - hp[j]);
            dhp[j] = dh * (1.0 - z[j]);
            rh[j] = r[j] * hp[j];
        }
        // Candidate: W_h, U_h (applied to r ⊙ h_prev), b_h.
        let mut drh = vec![0.0; hidden];
        for j in 0..hidden {
            let d = dah[j];
            if d == 0.0 {
                continue;
            }
            for k in 0..input {
                gw[2 * hi + j * input + k] += d * x[k];
            }
            let urow = &u[2 * hh + j * hidden..2 * hh + (j + 1) * hidden];
            let grow = &mut gu[2 * hh + j * hidden..2 * hh + (j + 1) * hidden];
            for k in 0..hidden {
                grow[k] += d * rh[k];
                drh[k] += urow[k] * d;
            }
            gb[2 * hidden + j] += d;
        }
        for j in 0..hidden {
            let dr = drh[j] * hp[j];
            dhp[j] += drh[j] * r[j];
            daz[j] = dz[j] * z[j] * (1.0 - z[j]);
            dar[j] = dr * r[j] * (1.0 - r[j]);
        }
        // Gates: W_{z,r}, U_{z,r}, b_{z,r}.
        for (gate, da) in [(0usize, &daz), (1, &dar)] {
            for j in 0..hidden {
                let d = da[j];
                if d == 0.0 {
                    continue;
                }
                for k in 0..input {
                    gw[gate * hi + j * input + k] += d * x[k];
                }
                let urow = &u[gate * hh + j * hidden..gate * hh + (j + 1) * hidden];
                let grow = &mut gu[gate * hh + j * hidden..gate * hh + (j + 1) * hidden];
                for k in 0..hidden {
                    grow[k] += d * hp[k];
                    dhp[k] += urow[k] * d;
                }
                gb[gate * hidden + j] += d;
            }
        }
        let dx = &mut dxs[t * input..(t + 1) * input];
        for (gate, da) in [(0usize, &daz), (1, &dar), (2, &dah)] {
            for j in 0..hidden {
                let wrow = &w[gate * hi + j * input..gate * hi + (j + 1) * input];
                for k in 0..input {
                    dx[k] += wrow[k] * da[j];
                }
            }
        }
        std::mem::swap(&mut dh_next, &mut dhp);
    }
    dxs
}

impl GruModel {
    /// All parameters zero, identity normalization.
    pub fn zeros(angle: Angle, history: usize, hidden: usize) -> Self {
        GruModel {
            angle,
            history,
            hidden,
            norm: Normalization::IDENTITY,
            params: vec![0.0; param_count(hidden)],
        }
    }

    /// Every parameter drawn uniformly from `±1/√hidden`.
    pub fn random(angle: Angle, history: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut m = Self::zeros(angle, history, hidden);
        m.params.iter_mut().for_each(|p| *p = rng.gen_range(-bound..bound));
        m
    }

    /// Rebuilds a model from its parts, checking dimensions.
    pub fn from_parts(
        angle: Angle,
        history: usize,
        hidden: usize,
        norm: Normalization,
        params: Vec<f64>,
    ) -> Result<Self, PredictionError> {
        let expected = param_count(hidden);
        if history < 2 || hidden == 0 || params.len() != expected {
            return Err(PredictionError::Dimension(format!(
                "history {history}, hidden {hidden}: expected {expected} parameters, got {}",
                params.len()
            )));
        }
        if !norm.is_valid() {
            return Err(PredictionError::Dimension(format!("invalid normalization {norm:?}")));
        }
        Ok(GruModel {
            angle,
            history,
            hidden,
            norm,
            params,
        })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Sets the head bias, the last parameter.
    pub fn set_head_bias(&mut self, b: f64) {
        *self.params.last_mut().expect("non-empty") = b;
    }

    fn check_len(&self, n: usize) -> Result<(), PredictionError> {
        if n != self.history {
            return Err(PredictionError::Dimension(format!(
                "model expects {} history samples, got {n}",
                self.history
            )));
        }
        Ok(())
    }

    /// Standardized input sequence for a raw history window.
    pub fn features(&self, history: &[f64]) -> Vec<f64> {
        let last = history[history.len() - 1];
        history.iter().map(|v| (v - last - self.norm.in_mean) / self.norm.in_scale).collect()
    }

    /// Network output for standardized inputs.
    pub fn forward_normalized(&self, xs: &[f64]) -> Result<f64, PredictionError> {
        self.check_len(xs.len())?;
        Ok(self.run(xs).0)
    }

    fn run(&self, xs: &[f64]) -> (f64, LayerTrace, LayerTrace) {
        let lay = Layout::new(self.hidden);
        let h = self.hidden;
        let steps = xs.len();
        let l1 = layer_forward(&self.params[lay.layer1..lay.layer2], 1, h, xs, steps);
        let l2 = layer_forward(&self.params[lay.layer2..lay.head], h, h, &l1.hs, steps);
        let head = &self.params[lay.head..];
        let y = dot(&head[..h], &l2.hs[(steps - 1) * h..]) + head[h];
        (y, l1, l2)
    }

    /// Predicted value, unwrapped, on the same line as `history`.
    pub fn predict_unwrapped(&self, history: &[f64]) -> Result<f64, PredictionError> {
        self.check_len(history.len())?;
        let y = self.run(&self.features(history)).0;
        Ok(history[history.len() - 1] + self.norm.out_mean + self.norm.out_scale * y)
    }

    /// Squared error `(y − target)²` on standardized inputs, accumulating its
    /// parameter gradient into `grad` scaled by `weight`.
    pub fn loss_and_grad(&self, xs: &[f64], target: f64, weight: f64, grad: &mut [f64]) -> f64 {
        let lay = Layout::new(self.hidden);
        let h = self.hidden;
        let steps = xs.len();
        let (y, l1, l2) = self.run(xs);
        let err = y - target;
        let dy = 2.0 * err * weight;

        let head = &self.params[lay.head..];
        let last = &l2.hs[(steps - 1) * h..];
        {
            let gh = &mut grad[lay.head..];
            for k in 0..h {
                gh[k] += dy * last[k];
            }
            gh[h] += dy;
        }
        let mut dh2 = vec![0.0; steps * h];
        for k in 0..h {
            dh2[(steps - 1) * h + k] = dy * head[k];
        }
        let (g1, g2) = grad[..lay.head].split_at_mut(lay.layer2);
        let dh1 = layer_backward(&self.params[lay.layer2..lay.head], g2, h, h, &l1.hs, &l2, &dh2, steps);
        layer_backward(&self.params[..lay.layer2], g1, 1, h, xs, &l1, &dh1, steps);
        err * err
    }
}

/// Prediction for a raw (unwrapped) history, wrapped into the angle's range.
pub fn gru_forward(model: &GruModel, history: &[f64]) -> Result<f64, PredictionError> {
    Ok(model.angle.wrap(model.predict_unwrapped(history)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruTrainConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Global gradient-norm ceiling per step; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for GruTrainConfig {
    fn default() -> Self {
        GruTrainConfig {
            hidden: 64,
            epochs: 20,
            learning_rate: 0.1,
            batch_size: 16,
            seed: 7,
            clip_norm: Some(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean standardized squared error per epoch, before that epoch's updates.
    pub epoch_losses: Vec<f64>,
}

fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut s, mut s2) = (0usize, 0.0, 0.0);
    for v in values {
        n += 1;
        s += v;
        s2 += v * v;
    }
    let mean = s / n as f64;
    let var = (s2 / n as f64 - mean * mean).max(0.0);
    let std = var.sqrt();
    (mean, if std > 1e-9 { std } else { 1.0 })
}

/// Standardization constants fitted on a dataset.
pub fn fit_normalization(windows: &[Window]) -> Normalization {
    let (in_mean, in_scale) = mean_std(windows.iter().flat_map(|w| {
        let last = w.history[w.history.len() - 1];
        w.history.iter().map(move |v| v - last)
    }));
    let (out_mean, out_scale) = mean_std(windows.iter().map(|w| w.target - w.history[w.history.len() - 1]));
    Normalization {
        in_mean,
        in_scale,
        out_mean,
        out_scale,
    }
}

fn batch_gradient(model: &GruModel, data: &[(Vec<f64>, f64)], batch: &[usize]) -> (Vec<f64>, f64) {
    let weight = 1.0 / batch.len() as f64;
    let n = model.params.len();
    let parts: Vec<(Vec<f64>, f64)> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut g = vec![0.0; n];
            let mut loss = 0.0;
            for &i in chunk {
                let (xs, t) = &data[i];
                loss += model.loss_and_grad(xs, *t, weight, &mut g);
            }
            (g, loss)
        })
        .collect();
    let mut grad = vec![0.0; n];
    let mut loss = 0.0;
    for (g, l) in parts {
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        loss += l;
    }
    (grad, loss)
}

/// Trains one per-angle model. The same seed and data give bit-identical
/// parameters.
pub fn gru_train(angle: Angle, windows: &[Window], cfg: &GruTrainConfig) -> Result<(GruModel, TrainReport), PredictionError> {
    let first = windows.first().ok_or(PredictionError::EmptyDataset)?;
    let history = first.history.len();
    if history < 2 {
        return Err(PredictionError::Dimension(format!("history length {history} < 2")));
    }
    if let Some(w) = windows.iter().find(|w| w.history.len() != history) {
        return Err(PredictionError::Dimension(format!(
            "window lengths differ: {history} vs {}",
            w.history.len()
        )));
    }
    if windows.iter().any(|w| !w.target.is_finite() || w.history.iter().any(|v| !v.is_finite())) {
        return Err(PredictionError::Dimension("non-finite value in training data".into()));
    }
    if cfg.hidden == 0 || cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(PredictionError::Config(format!("invalid training config {cfg:?}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = GruModel::random(angle, history, cfg.hidden, &mut rng);
    model.norm = fit_normalization(windows);
    let data: Vec<(Vec<f64>, f64)> = windows
        .iter()
        .map(|w| {
            let last = w.history[history - 1];
            (model.features(&w.history), (w.target - last - model.norm.out_mean) / model.norm.out_scale)
        })
        .collect();

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (mut grad, loss) = batch_gradient(&model, &data, batch);
            total += loss;
            if !loss.is_finite() {
                return Err(PredictionError::NanLoss { epoch });
            }
            if let Some(c) = cfg.clip_norm {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > c {
                    let s = c / norm;
                    grad.iter_mut().for_each(|g| *g *= s);
                }
            }
            model.params.iter_mut().zip(&grad).for_each(|(p, g)| *p -= cfg.learning_rate * g);
        }
        let mean = total / data.len() as f64;
        if !mean.is_finite() {
            return Err(PredictionError::NanLoss { epoch });
        }
        epoch_losses.push(mean);
    }
    Ok((model, TrainReport { epoch_losses }))
}
