//! RGB raster frames and the pixel primitives the rest of the pipeline is
//! built from: lossless PPM I/O, box downsampling, bilinear upsampling,
//! crop/paste and Rec.601 luma.
//!
//! Every operation returns a fresh [`Frame`]; frames are never mutated in
//! place by the public API.

mod ppm;
mod resample;

pub use ppm::{decode_ppm, encode_ppm, frame_path, load_ppm, save_ppm};
pub use resample::{downsample_box, upsample_bilinear};
pub(crate) use resample::round_u8;

use thiserror::Error;

/// One 8-bit RGB sample.
pub type Rgb = [u8; 3];

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("frame dimensions must be at least 1x1, got {width}x{height}")]
    EmptyFrame { width: usize, height: usize },
    #[error("pixel buffer holds {actual} bytes, expected {expected} for {width}x{height}")]
    BufferSize {
        width: usize,
        height: usize,
        expected: usize,
        actual: usize,
    },
    #[error("unsupported magic {0:?}, only binary P6 is accepted")]
    UnsupportedMagic(String),
    #[error("malformed PPM header: {0}")]
    MalformedHeader(String),
    #[error("unsupported maxval {0}, only 255 is accepted")]
    UnsupportedMaxval(u32),
    #[error("truncated pixel data: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("{0} unexpected bytes after pixel data")]
    TrailingData(usize),
    #[error("factor {factor} does not divide {axis} dimension {size}")]
    NotDivisible {
        axis: &'static str,
        size: usize,
        factor: usize,
    },
    #[error("scale factors must be at least 1")]
    ZeroFactor,
    #[error("region {rect:?} does not fit in a {width}x{height} frame")]
    OutOfBounds {
        rect: Rect,
        width: usize,
        height: usize,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub const fn new(x0: usize, y0: usize, w: usize, h: usize) -> Self {
        Rect { x0, y0, w, h }
    }

    pub fn x1(&self) -> usize {
        self.x0 + self.w
    }

    pub fn y1(&self) -> usize {
        self.y0 + self.h
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1() && y >= self.y0 && y < self.y1()
    }

    /// True if `other` lies entirely inside `self`.
    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x0 >= self.x0 && other.y0 >= self.y0 && other.x1() <= self.x1() && other.y1() <= self.y1()
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x0 < other.x1() && other.x0 < self.x1() && self.y0 < other.y1() && other.y0 < self.y1()
    }

    fn fits(&self, width: usize, height: usize) -> bool {
        self.w >= 1 && self.h >= 1 && self.x1() <= width && self.y1() <= height
    }
}

/// A `width`×`height` raster of RGB pixels stored row-major, three bytes
/// per pixel.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Frame")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl Frame {
    /// Wraps an interleaved RGB buffer of exactly `3·width·height` bytes.
    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyFrame { width, height });
        }
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(3))
            .ok_or(ImageError::EmptyFrame { width, height })?;
        if data.len() != expected {
            return Err(ImageError::BufferSize {
                width,
                height,
                expected,
                actual: data.len(),
            });
        }
        Ok(Frame {
            width,
            height,
            data,
        })
    }

    pub fn from_pixels(width: usize, height: usize, pixels: &[Rgb]) -> Result<Self, ImageError> {
        Self::from_raw(width, height, pixels.iter().flatten().copied().collect())
    }

    /// A frame filled with one color.
    pub fn filled(width: usize, height: usize, color: Rgb) -> Result<Self, ImageError> {
        let n = width.saturating_mul(height);
        Self::from_raw(width, height, color.repeat(n))
    }

    /// Builds a frame by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> Rgb,
    ) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width.saturating_mul(height) * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::from_raw(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn full_rect(&self) -> Rect {
        Rect::new(0, 0, self.width, self.height)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Returns a copy with one pixel replaced.
    pub fn with_pixel(mut self, x: usize, y: usize, px: Rgb) -> Self {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&px);
        self
    }

    pub fn row(&self, y: usize) -> &[u8] {
        let stride = 3 * self.width;
        &self.data[y * stride..(y + 1) * stride]
    }

    pub fn pixels(&self) -> impl Iterator<Item = Rgb> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    fn check_rect(&self, rect: Rect) -> Result<(), ImageError> {
        if rect.fits(self.width, self.height) {
            Ok(())
        } else {
            Err(ImageError::OutOfBounds {
                rect,
                width: self.width,
                height: self.height,
            })
        }
    }
}

/// Copies the pixels under `rect` into a new frame.
pub fn crop(frame: &Frame, rect: Rect) -> Result<Frame, ImageError> {
    frame.check_rect(rect)?;
    let mut data = Vec::with_capacity(rect.area() * 3);
    for y in rect.y0..rect.y1() {
        data.extend_from_slice(&frame.row(y)[3 * rect.x0..3 * rect.x1()]);
    }
    Frame::from_raw(rect.w, rect.h, data)
}

/// Returns `dst` with `src` written at `(x0, y0)`; pixels outside the pasted
/// region are untouched.
pub fn paste(dst: &Frame, src: &Frame, x0: usize, y0: usize) -> Result<Frame, ImageError> {
    let mut out = dst.clone();
    paste_into(&mut out, src, x0, y0)?;
    Ok(out)
}

pub(crate) fn paste_into(dst: &mut Frame, src: &Frame, x0: usize, y0: usize) -> Result<(), ImageError> {
    let rect = Rect::new(x0, y0, src.width, src.height);
    dst.check_rect(rect)?;
    let stride = 3 * dst.width;
    for (sy, src_row) in src.data.chunks_exact(3 * src.width).enumerate() {
        let start = (y0 + sy) * stride + 3 * x0;
        dst.data[start..start + src_row.len()].copy_from_slice(src_row);
    }
    Ok(())
}

/// A real-valued single-channel plane, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LumaPlane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl LumaPlane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height, "luma plane size mismatch");
        LumaPlane {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// Rec.601 luma of one pixel, unrounded. The weighted sum is formed in
/// integers so white maps to exactly 255.0.
#[inline]
pub fn luma(px: Rgb) -> f64 {
    (299 * px[0] as u32 + 587 * px[1] as u32 + 114 * px[2] as u32) as f64 / 1000.0
}

pub fn to_luma(frame: &Frame) -> LumaPlane {
    LumaPlane::new(frame.width, frame.height, frame.pixels().map(luma).collect())
}
