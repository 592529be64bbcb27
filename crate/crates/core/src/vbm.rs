//! VBM frames: the FOV crop, a 4× downsampled base and a 2× downsampled
//! margin band packed side by side into one raster.
//!
//! ```text
//!  packed frame (src_w/3 + src_w/4) × src_h/2
//! +-------------------+-----------+
//! |                   |   base    |  src_h/4
//! |       FOV         +-----------+
//! |                   |  margin   |  src_h/4
//! +-------------------+-----------+
//!       src_w/3          src_w/4
//! ```
//!
//! The FOV is the centered 120°×90° window of a viewport-recentered frame.
//! The margin source is the centered 180°×90° window (FOV ±30° of yaw).

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::imagery::{self, crop, downsample_box, paste_into, upsample_bilinear, Frame, ImageError, Rect};

pub const BASE_FACTOR: usize = 4;
pub const MARGIN_FACTOR: usize = 2;

#[derive(Debug, Error)]
pub enum VbmError {
    #[error("source width {0} must be a multiple of 12")]
    WidthModulus(usize),
    #[error("source height {0} must be a multiple of 4")]
    HeightModulus(usize),
    #[error("packed frame is {actual_w}x{actual_h}, layout expects {expected_w}x{expected_h}")]
    PackedSize {
        expected_w: usize,
        expected_h: usize,
        actual_w: usize,
        actual_h: usize,
    },
    #[error("malformed VBM sidecar: {0}")]
    Sidecar(String),
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VbmLayout {
    pub src_w: usize,
    pub src_h: usize,
    /// Regions inside the packed frame.
    pub fov: Rect,
    pub base: Rect,
    pub margin: Rect,
    /// Regions inside the source frame.
    pub fov_src: Rect,
    pub margin_src: Rect,
    pub packed_w: usize,
    pub packed_h: usize,
    pub base_factor: usize,
    pub margin_factor: usize,
}

/// Computes the packing geometry for a `src_w`×`src_h` source.
///
/// Requires `src_w % 12 == 0` and `src_h % 4 == 0` so every region has an
/// integral size.
pub fn vbm_layout(src_w: usize, src_h: usize) -> Result<VbmLayout, VbmError> {
    if src_w == 0 || !src_w.is_multiple_of(12) {
        return Err(VbmError::WidthModulus(src_w));
    }
    if src_h == 0 || !src_h.is_multiple_of(4) {
        return Err(VbmError::HeightModulus(src_h));
    }
    let (fov_w, fov_h) = (src_w / 3, src_h / 2);
    let (base_w, base_h) = (src_w / BASE_FACTOR, src_h / BASE_FACTOR);
    Ok(VbmLayout {
        src_w,
        src_h,
        fov: Rect::new(0, 0, fov_w, fov_h),
        base: Rect::new(fov_w, 0, base_w, base_h),
        margin: Rect::new(fov_w, base_h, base_w, base_h),
        fov_src: Rect::new(src_w / 3, src_h / 4, fov_w, fov_h),
        margin_src: Rect::new(src_w / 4, src_h / 4, src_w / 2, src_h / 2),
        packed_w: fov_w + base_w,
        packed_h: fov_h,
        base_factor: BASE_FACTOR,
        margin_factor: MARGIN_FACTOR,
    })
}

impl VbmLayout {
    pub fn packed_pixels(&self) -> usize {
        self.packed_w * self.packed_h
    }

    pub fn src_pixels(&self) -> usize {
        self.src_w * self.src_h
    }

    /// One-line sidecar record, `VBM1 <src_w> <src_h>`.
    pub fn to_sidecar(&self) -> String {
        format!("VBM1 {} {}\n", self.src_w, self.src_h)
    }

    pub fn from_sidecar(text: &str) -> Result<Self, VbmError> {
        let mut fields = text.split_ascii_whitespace();
        if fields.next() != Some("VBM1") {
            return Err(VbmError::Sidecar("expected leading tag VBM1".into()));
        }
        let mut dim = |name: &str| -> Result<usize, VbmError> {
            let tok = fields
                .next()
                .ok_or_else(|| VbmError::Sidecar(format!("missing {name}")))?;
            tok.parse()
                .map_err(|_| VbmError::Sidecar(format!("{name} is not an integer: {tok:?}")))
        };
        let (w, h) = (dim("src_w")?, dim("src_h")?);
        if let Some(extra) = fields.next() {
            return Err(VbmError::Sidecar(format!("unexpected field {extra:?}")));
        }
        vbm_layout(w, h)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VbmFrame {
    pub layout: VbmLayout,
    pub packed: Frame,
}

impl VbmFrame {
    pub fn new(layout: VbmLayout, packed: Frame) -> Result<Self, VbmError> {
        if packed.width() != layout.packed_w || packed.height() != layout.packed_h {
            return Err(VbmError::PackedSize {
                expected_w: layout.packed_w,
                expected_h: layout.packed_h,
                actual_w: packed.width(),
                actual_h: packed.height(),
            });
        }
        Ok(VbmFrame { layout, packed })
    }

    /// Writes the packed raster to `path` and the layout record next to it
    /// (see [`sidecar_path`]).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), VbmError> {
        let path = path.as_ref();
        imagery::save_ppm(&self.packed, path)?;
        let side = sidecar_path(path);
        std::fs::write(&side, self.layout.to_sidecar()).map_err(|source| {
            ImageError::Io {
                path: side.display().to_string(),
                source,
            }
            .into()
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, VbmError> {
        let path = path.as_ref();
        let side = sidecar_path(path);
        let text = std::fs::read_to_string(&side).map_err(|source| ImageError::Io {
            path: side.display().to_string(),
            source,
        })?;
        let layout = VbmLayout::from_sidecar(&text)?;
        VbmFrame::new(layout, imagery::load_ppm(path)?)
    }
}

/// `frame.ppm` → `frame.vbm`.
pub fn sidecar_path(ppm: &Path) -> PathBuf {
    ppm.with_extension("vbm")
}

/// Splits a viewport-recentered frame into FOV, base and margin and packs
/// them.
pub fn make_vbm(reproj: &Frame) -> Result<VbmFrame, VbmError> {
    let layout = vbm_layout(reproj.width(), reproj.height())?;
    let fov = crop(reproj, layout.fov_src)?;
    let base = downsample_box(reproj, BASE_FACTOR, BASE_FACTOR)?;
    let margin = downsample_box(&crop(reproj, layout.margin_src)?, MARGIN_FACTOR, MARGIN_FACTOR)?;
    let mut packed = Frame::filled(layout.packed_w, layout.packed_h, [0, 0, 0])?;
    paste_into(&mut packed, &fov, layout.fov.x0, layout.fov.y0)?;
    paste_into(&mut packed, &base, layout.base.x0, layout.base.y0)?;
    paste_into(&mut packed, &margin, layout.margin.x0, layout.margin.y0)?;
    VbmFrame::new(layout, packed)
}

pub struct VbmParts {
    pub fov: Frame,
    pub base: Frame,
    pub margin: Frame,
}

pub fn unpack_vbm(vbm: &VbmFrame) -> Result<VbmParts, VbmError> {
    let l = &vbm.layout;
    if vbm.packed.width() != l.packed_w || vbm.packed.height() != l.packed_h {
        return Err(VbmError::PackedSize {
            expected_w: l.packed_w,
            expected_h: l.packed_h,
            actual_w: vbm.packed.width(),
            actual_h: vbm.packed.height(),
        });
    }
    Ok(VbmParts {
        fov: crop(&vbm.packed, l.fov)?,
        base: crop(&vbm.packed, l.base)?,
        margin: crop(&vbm.packed, l.margin)?,
    })
}

/// Client-side reconstruction in the recentered frame: upsampled base, then
/// the upsampled margin over `margin_src`, then the FOV over `fov_src`.
pub fn reconstruct(vbm: &VbmFrame) -> Result<Frame, VbmError> {
    let l = &vbm.layout;
    let parts = unpack_vbm(vbm)?;
    let mut out = upsample_bilinear(&parts.base, l.base_factor, l.base_factor)?;
    let margin = upsample_bilinear(&parts.margin, l.margin_factor, l.margin_factor)?;
    paste_into(&mut out, &margin, l.margin_src.x0, l.margin_src.y0)?;
    paste_into(&mut out, &parts.fov, l.fov_src.x0, l.fov_src.y0)?;
    Ok(out)
}
