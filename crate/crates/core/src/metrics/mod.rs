//! Image quality (MSE, PSNR, SSIM on Rec.601 luma) and bandwidth accounting.

mod bandwidth;
mod ssim;

pub use bandwidth::{
    bandwidth_summary, parse_encoded_sizes, BandwidthRecord, BandwidthSummary, EncodedSizes, Scheme, SchemeTotals,
    TickRow,
};
pub use ssim::{ssim, ssim_map, SsimMap, SSIM_WINDOW};

use thiserror::Error;

use crate::imagery::{to_luma, Frame, LumaPlane, Rect};
use crate::vbm::VbmLayout;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("plane sizes differ: {0}x{1} vs {2}x{3}")]
    SizeMismatch(usize, usize, usize, usize),
    #[error("SSIM needs planes of at least 11x11, got {0}x{1}")]
    TooSmall(usize, usize),
    #[error("frame is {0}x{1} but the layout describes {2}x{3}")]
    LayoutMismatch(usize, usize, usize, usize),
    #[error("empty region")]
    EmptyRegion,
    #[error("scheme {scheme} covers ticks {found:?}, expected {expected:?}")]
    TickCoverage {
        scheme: Scheme,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("encoded-size table line {line}: {msg}")]
    EncodedSizes { line: usize, msg: String },
}

fn check_same(a: &LumaPlane, b: &LumaPlane) -> Result<(), MetricsError> {
    if a.width != b.width || a.height != b.height {
        return Err(MetricsError::SizeMismatch(a.width, a.height, b.width, b.height));
    }
    Ok(())
}

/// Mean squared difference.
pub fn mse(a: &LumaPlane, b: &LumaPlane) -> Result<f64, MetricsError> {
    check_same(a, b)?;
    let sum: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.data.len() as f64)
}

/// PSNR in dB against a peak of 255; `+∞` when the planes are identical.
pub fn psnr(a: &LumaPlane, b: &LumaPlane) -> Result<f64, MetricsError> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0 * 255.0 / mse).log10()
    }
}

/// Pixel set a quality report is computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Full,
    Rect(Rect),
    /// Inside the first rectangle but outside the second.
    Ring { outer: Rect, hole: Rect },
    /// Everything outside the rectangle.
    Outside(Rect),
}

impl Region {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        match self {
            Region::Full => true,
            Region::Rect(r) => r.contains(x, y),
            Region::Ring { outer, hole } => outer.contains(x, y) && !hole.contains(x, y),
            Region::Outside(r) => !r.contains(x, y),
        }
    }

    /// True if every pixel of `win` belongs to the region.
    pub fn contains_window(&self, win: &Rect) -> bool {
        match self {
            Region::Full => true,
            Region::Rect(r) => r.contains_rect(win),
            Region::Ring { outer, hole } => outer.contains_rect(win) && !hole.intersects(win),
            Region::Outside(r) => !r.intersects(win),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionLabel {
    Full,
    Fov,
    MarginRing,
    BaseRing,
}

impl RegionLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionLabel::Full => "full",
            RegionLabel::Fov => "fov",
            RegionLabel::MarginRing => "margin_ring",
            RegionLabel::BaseRing => "base_ring",
        }
    }
}

impl std::fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub region: RegionLabel,
    pub mse: f64,
    pub psnr: f64,
    /// Mean SSIM over the 11×11 windows lying wholly inside the region;
    /// `None` if the region is too thin to hold one.
    pub ssim: Option<f64>,
}

/// MSE over the pixels of `region`.
pub fn region_mse(a: &LumaPlane, b: &LumaPlane, region: &Region) -> Result<f64, MetricsError> {
    check_same(a, b)?;
    let (mut sum, mut n) = (0.0, 0usize);
    for y in 0..a.height {
        for x in 0..a.width {
            if region.contains(x, y) {
                let d = a.at(x, y) - b.at(x, y);
                sum += d * d;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(MetricsError::EmptyRegion);
    }
    Ok(sum / n as f64)
}

/// Quality of a reconstruction over the whole frame, the FOV, the margin
/// ring (margin source minus FOV) and the base ring (outside the margin
/// source).
pub fn region_quality(
    original: &Frame,
    reconstructed: &Frame,
    layout: &VbmLayout,
) -> Result<Vec<QualityReport>, MetricsError> {
    for f in [original, reconstructed] {
        if f.width() != layout.src_w || f.height() != layout.src_h {
            return Err(MetricsError::LayoutMismatch(f.width(), f.height(), layout.src_w, layout.src_h));
        }
    }
    let (a, b) = (to_luma(original), to_luma(reconstructed));
    let map = if a.width >= SSIM_WINDOW && a.height >= SSIM_WINDOW {
        Some(ssim_map(&a, &b)?)
    } else {
        None
    };
    let regions = [
        (RegionLabel::Full, Region::Full),
        (RegionLabel::Fov, Region::Rect(layout.fov_src)),
        (
            RegionLabel::MarginRing,
            Region::Ring {
                outer: layout.margin_src,
                hole: layout.fov_src,
            },
        ),
        (RegionLabel::BaseRing, Region::Outside(layout.margin_src)),
    ];
    regions
        .into_iter()
        .map(|(label, region)| {
            let mse = region_mse(&a, &b, &region)?;
            Ok(QualityReport {
                region: label,
                mse,
                psnr: psnr_from_mse(mse),
                ssim: map.as_ref().and_then(|m| m.region_mean(&region)),
            })
        })
        .collect()
}
