use super::{Frame, ImageError};

/// Averages each `fx`×`fy` block per channel, rounding half up.
pub fn downsample_box(frame: &Frame, fx: usize, fy: usize) -> Result<Frame, ImageError> {
    if fx == 0 || fy == 0 {
        return Err(ImageError::ZeroFactor);
    }
    let (w, h) = (frame.width(), frame.height());
    if w % fx != 0 {
        return Err(ImageError::NotDivisible {
            axis: "horizontal",
            size: w,
            factor: fx,
        });
    }
    if h % fy != 0 {
        return Err(ImageError::NotDivisible {
            axis: "vertical",
            size: h,
            factor: fy,
        });
    }
    if fx == 1 && fy == 1 {
        return Ok(frame.clone());
    }
    let (ow, oh) = (w / fx, h / fy);
    let n = (fx * fy) as u32;
    let mut sums = vec![0u32; 3 * ow];
    let mut out = Vec::with_capacity(3 * ow * oh);
    for oy in 0..oh {
        sums.iter_mut().for_each(|s| *s = 0);
        for y in oy * fy..(oy + 1) * fy {
            for (x, px) in frame.row(y).chunks_exact(3).enumerate() {
                let o = 3 * (x / fx);
                sums[o] += px[0] as u32;
                sums[o + 1] += px[1] as u32;
                sums[o + 2] += px[2] as u32;
            }
        }
        out.extend(sums.iter().map(|&s| ((s + n / 2) / n) as u8));
    }
    Frame::from_raw(ow, oh, out)
}

/// One output coordinate's two source taps and the weight of the second.
#[derive(Clone, Copy)]
struct Tap {
    lo: usize,
    hi: usize,
    t: f64,
}

/// Half-pixel-centered taps: output `i` samples source `(i+0.5)/f − 0.5`,
/// clamped to the source edge.
fn taps(src_len: usize, factor: usize) -> Vec<Tap> {
    (0..src_len * factor)
        .map(|i| {
            let s = ((i as f64 + 0.5) / factor as f64 - 0.5).clamp(0.0, (src_len - 1) as f64);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(src_len - 1);
            Tap { lo, hi, t: s - lo as f64 }
        })
        .collect()
}

/// Bilinear upsampling by integer factors with half-pixel alignment and
/// edge clamping; results are rounded half up.
pub fn upsample_bilinear(frame: &Frame, fx: usize, fy: usize) -> Result<Frame, ImageError> {
    if fx == 0 || fy == 0 {
        return Err(ImageError::ZeroFactor);
    }
    if fx == 1 && fy == 1 {
        return Ok(frame.clone());
    }
    let (w, h) = (frame.width(), frame.height());
    let xt = taps(w, fx);
    let yt = taps(h, fy);
    let bytes = frame.as_bytes();
    let mut out = Vec::with_capacity(3 * xt.len() * yt.len());
    for ty in &yt {
        let r0 = &bytes[3 * w * ty.lo..3 * w * (ty.lo + 1)];
        let r1 = &bytes[3 * w * ty.hi..3 * w * (ty.hi + 1)];
        for tx in &xt {
            for c in 0..3 {
                let top = lerp(r0[3 * tx.lo + c], r0[3 * tx.hi + c], tx.t);
                let bottom = lerp(r1[3 * tx.lo + c], r1[3 * tx.hi + c], tx.t);
                out.push(round_u8(top + (bottom - top) * ty.t));
            }
        }
    }
    Frame::from_raw(xt.len(), yt.len(), out)
}

#[inline]
fn lerp(a: u8, b: u8, t: f64) -> f64 {
    a as f64 + (b as f64 - a as f64) * t
}

#[inline]
pub(crate) fn round_u8(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}
