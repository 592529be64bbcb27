//! Binary PPM (P6, maxval 255).
//!
//! The decoder accepts the full netpbm header grammar (arbitrary whitespace
//! and `#` comments between fields); the encoder always writes the canonical
//! `P6\n<w> <h>\n255\n` header.

use std::io::Write;
use std::path::{Path, PathBuf};

use super::{Frame, ImageError};

pub fn load_ppm(path: impl AsRef<Path>) -> Result<Frame, ImageError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| ImageError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_ppm(&bytes)
}

pub fn save_ppm(frame: &Frame, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let path = path.as_ref();
    let io_err = |source| ImageError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(&encode_ppm(frame)).map_err(io_err)?;
    w.flush().map_err(io_err)
}

pub fn encode_ppm(frame: &Frame) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", frame.width(), frame.height());
    let mut out = Vec::with_capacity(header.len() + frame.as_bytes().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(frame.as_bytes());
    out
}

/// `dir/frame_%06d.ppm`; frame numbering starts at 1.
pub fn frame_path(dir: impl AsRef<Path>, index: usize) -> PathBuf {
    dir.as_ref().join(format!("frame_{index:06}.ppm"))
}

pub fn decode_ppm(bytes: &[u8]) -> Result<Frame, ImageError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = bytes.get(..2).unwrap_or(bytes);
    if magic != b"P6" {
        return Err(ImageError::UnsupportedMagic(String::from_utf8_lossy(magic).into_owned()));
    }
    cur.pos = 2;
    if !cur.peek().is_some_and(is_space) {
        return Err(ImageError::MalformedHeader("missing whitespace after magic".into()));
    }
    let width = cur.header_int("width")?;
    let height = cur.header_int("height")?;
    let maxval = cur.header_int("maxval")?;
    if width == 0 || height == 0 {
        return Err(ImageError::MalformedHeader(format!("zero dimension {width}x{height}")));
    }
    if maxval != 255 {
        return Err(ImageError::UnsupportedMaxval(maxval));
    }
    // Exactly one whitespace byte separates maxval from the raster.
    match cur.peek() {
        Some(b) if is_space(b) => cur.pos += 1,
        _ => return Err(ImageError::MalformedHeader("missing whitespace after maxval".into())),
    }
    let expected = (width as usize)
        .checked_mul(height as usize)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| ImageError::MalformedHeader(format!("dimensions {width}x{height} overflow")))?;
    let body = &bytes[cur.pos..];
    if body.len() < expected {
        return Err(ImageError::Truncated {
            expected,
            actual: body.len(),
        });
    }
    if body.len() > expected {
        return Err(ImageError::TrailingData(body.len() - expected));
    }
    Frame::from_raw(width as usize, height as usize, body.to_vec())
}

fn is_space(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_space_and_comments(&mut self) {
        while let Some(b) = self.peek() {
            if is_space(b) {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(c) = self.peek() {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn header_int(&mut self, field: &str) -> Result<u32, ImageError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.peek().is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImageError::MalformedHeader(format!("expected {field}")));
        }
        let digits = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        digits
            .parse::<u32>()
            .map_err(|_| ImageError::MalformedHeader(format!("{field} out of range: {digits}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_two_pixel_file() {
        let bytes = b"P6\n2 1\n255\n\xff\x00\x00\x00\x00\xff";
        let f = decode_ppm(bytes).unwrap();
        assert_eq!((f.width(), f.height()), (2, 1));
        assert_eq!(f.pixel(0, 0), [255, 0, 0]);
        assert_eq!(f.pixel(1, 0), [0, 0, 255]);
    }

    #[test]
    fn smallest_frame_encoding() {
        let f = Frame::filled(1, 1, [0, 0, 0]).unwrap();
        let bytes = encode_ppm(&f);
        // 11 header bytes plus one pixel.
        assert_eq!(bytes.len(), 14);
        assert_eq!(&bytes[..11], b"P6\n1 1\n255\n");
        assert_eq!(&bytes[11..], &[0, 0, 0]);
    }

    #[test]
    fn full_resolution_file_size() {
        let f = Frame::filled(3840, 2048, [1, 2, 3]).unwrap();
        let bytes = encode_ppm(&f);
        // "P6\n3840 2048\n255\n" is 17 bytes.
        assert_eq!(bytes.len(), 17 + 3 * 3840 * 2048);
        assert!(bytes.starts_with(b"P6\n3840 2048\n255\n"));
    }

    #[test]
    fn header_comments_and_whitespace() {
        let bytes = b"P6 # made by hand\n 1\t1 # size\n255\r\x01\x02\x03";
        let f = decode_ppm(bytes).unwrap();
        assert_eq!(f.pixel(0, 0), [1, 2, 3]);
    }

    #[test]
    fn distinct_diagnostics() {
        assert!(matches!(decode_ppm(b"P5\n1 1\n255\n\x00"), Err(ImageError::UnsupportedMagic(m)) if m == "P5"));
        assert!(matches!(decode_ppm(b""), Err(ImageError::UnsupportedMagic(_))));
        assert!(matches!(decode_ppm(b"P6\nx 1\n255\n"), Err(ImageError::MalformedHeader(_))));
        assert!(matches!(decode_ppm(b"P61 1 255 "), Err(ImageError::MalformedHeader(_))));
        assert!(matches!(decode_ppm(b"P6\n1 1\n65535\n\x00"), Err(ImageError::UnsupportedMaxval(65535))));
        assert!(matches!(decode_ppm(b"P6\n2 2\n255\n\x00\x00"), Err(ImageError::Truncated { expected: 12, actual: 2 })));
        assert!(matches!(decode_ppm(b"P6\n1 1\n255\n\x00\x00\x00\x00"), Err(ImageError::TrailingData(1))));
        assert!(matches!(decode_ppm(b"P6\n0 1\n255\n"), Err(ImageError::MalformedHeader(_))));
        assert!(matches!(decode_ppm(b"P6\n99999999999 1\n255\n"), Err(ImageError::MalformedHeader(_))));
        assert!(matches!(decode_ppm(b"P6\n1 1\n255"), Err(ImageError::MalformedHeader(_))));
    }

    #[test]
    fn canonical_file_round_trips_byte_exact() {
        let mut bytes = b"P6\n3 2\n255\n".to_vec();
        bytes.extend((0u8..18).map(|b| b.wrapping_mul(37)));
        assert_eq!(encode_ppm(&decode_ppm(&bytes).unwrap()), bytes);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let f = Frame::from_fn(5, 3, |x, y| [x as u8, y as u8, (x * y) as u8]).unwrap();
        let p = frame_path(dir.path(), 1);
        assert!(p.ends_with("frame_000001.ppm"));
        save_ppm(&f, &p).unwrap();
        assert_eq!(load_ppm(&p).unwrap(), f);
        assert!(matches!(load_ppm(dir.path().join("missing.ppm")), Err(ImageError::Io { .. })));
    }
}
