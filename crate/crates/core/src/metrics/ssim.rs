use super::{check_same, MetricsError, Region};
use crate::imagery::{LumaPlane, Rect};

pub const SSIM_WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

/// Normalized 1-D Gaussian; the 2-D window is its outer product.
fn kernel() -> [f64; SSIM_WINDOW] {
    let c = (SSIM_WINDOW / 2) as f64;
    let mut k: [f64; SSIM_WINDOW] = std::array::from_fn(|i| {
        let d = i as f64 - c;
        (-d * d / (2.0 * SIGMA * SIGMA)).exp()
    });
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Local SSIM for every fully-inside window; entry `(x, y)` belongs to the
/// window whose top-left pixel is `(x, y)`.
pub struct SsimMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl SsimMap {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Mean over windows lying wholly inside `region`.
    pub fn region_mean(&self, region: &Region) -> Option<f64> {
        let (mut sum, mut n) = (0.0, 0usize);
        for y in 0..self.height {
            for x in 0..self.width {
                if region.contains_window(&Rect::new(x, y, SSIM_WINDOW, SSIM_WINDOW)) {
                    sum += self.values[y * self.width + x];
                    n += 1;
                }
            }
        }
        (n > 0).then(|| sum / n as f64)
    }
}

/// Gaussian-weighted local statistics via two separable passes over the five
/// moment planes, valid region only.
pub fn ssim_map(a: &LumaPlane, b: &LumaPlane) -> Result<SsimMap, MetricsError> {
    check_same(a, b)?;
    let (w, h) = (a.width, a.height);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricsError::TooSmall(w, h));
    }
    let k = kernel();
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;

    // Horizontal pass: [mu_a, mu_b, E[a²], E[b²], E[ab]] per (ox, y).
    let mut horiz = vec![[0.0f64; 5]; ow * h];
    for y in 0..h {
        let ra = &a.data[y * w..(y + 1) * w];
        let rb = &b.data[y * w..(y + 1) * w];
        for ox in 0..ow {
            let mut acc = [0.0; 5];
            for (t, &kt) in k.iter().enumerate() {
                let (va, vb) = (ra[ox + t], rb[ox + t]);
                acc[0] += kt * va;
                acc[1] += kt * vb;
                acc[2] += kt * va * va;
                acc[3] += kt * vb * vb;
                acc[4] += kt * va * vb;
            }
            horiz[y * ow + ox] = acc;
        }
    }

    let mut values = Vec::with_capacity(ow * oh);
    for oy in 0..oh {
        for ox in 0..ow {
            let mut m = [0.0; 5];
            for (t, &kt) in k.iter().enumerate() {
                let row = &horiz[(oy + t) * ow + ox];
                for c in 0..5 {
                    m[c] += kt * row[c];
                }
            }
            values.push(local_ssim(m));
        }
    }
    Ok(SsimMap {
        width: ow,
        height: oh,
        values,
    })
}

#[inline]
fn local_ssim(m: [f64; 5]) -> f64 {
    let [mu_a, mu_b, ea2, eb2, eab] = m;
    let var_a = ea2 - mu_a * mu_a;
    let var_b = eb2 - mu_b * mu_b;
    let cov = eab - mu_a * mu_b;
    ((2.0 * mu_a * mu_b + C1) * (2.0 * cov + C2)) / ((mu_a * mu_a + mu_b * mu_b + C1) * (var_a + var_b + C2))
}

/// Mean SSIM with an 11×11 Gaussian window (σ = 1.5), no border padding.
pub fn ssim(a: &LumaPlane, b: &LumaPlane) -> Result<f64, MetricsError> {
    Ok(ssim_map(a, b)?.mean())
}
