//! Equirectangular ↔ sphere mapping and viewport-recentering reprojection.
//!
//! Conventions: `+z` is the north pole, longitude 0 (the `+x` axis) sits at
//! the horizontal center of the frame, and pixel `(u, v)` has its center at
//! `(u + 0.5, v + 0.5)`. Positive pitch looks toward `+z`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rayon::prelude::*;
use thiserror::Error;

use crate::imagery::{Frame, Rect};

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("direction is not unit length (norm {0})")]
    NotUnit(f64),
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Head orientation in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Viewport {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl Viewport {
    /// Normalizes yaw and roll into `(−π, π]` and clamps pitch to `[−π/2, π/2]`.
    pub fn new(yaw: f64, pitch: f64, roll: f64) -> Self {
        Viewport {
            yaw: wrap_angle(yaw),
            pitch: pitch.clamp(-FRAC_PI_2, FRAC_PI_2),
            roll: wrap_angle(roll),
        }
    }

    /// Unit vector of the view direction; roll does not move it.
    pub fn direction(&self) -> UnitVec3 {
        let (sy, cy) = self.yaw.sin_cos();
        let (sp, cp) = self.pitch.sin_cos();
        UnitVec3 {
            x: cy * cp,
            y: sy * cp,
            z: sp,
        }
    }

    pub fn degrees(yaw: f64, pitch: f64, roll: f64) -> Self {
        Self::new(yaw.to_radians(), pitch.to_radians(), roll.to_radians())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UnitVec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl UnitVec3 {
    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Longitude/latitude of the direction as a roll-free viewport.
    pub fn to_viewport(&self) -> Viewport {
        let horiz = self.x.hypot(self.y);
        Viewport::new(self.y.atan2(self.x), self.z.atan2(horiz), 0.0)
    }
}

/// A 3×3 rotation, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot3(pub [[f64; 3]; 3]);

impl Rot3 {
    pub const IDENTITY: Rot3 = Rot3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn about_x(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Rot3([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    pub fn about_y(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Rot3([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    }

    pub fn about_z(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Rot3([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Rot3(std::array::from_fn(|i| std::array::from_fn(|j| m[j][i])))
    }

    pub fn mul(&self, other: &Rot3) -> Self {
        let (a, b) = (&self.0, &other.0);
        Rot3(std::array::from_fn(|i| {
            std::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum())
        }))
    }

    #[inline]
    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Largest elementwise deviation of `R·Rᵀ` from the identity.
    pub fn orthonormality_residual(&self) -> f64 {
        let p = self.mul(&self.transpose());
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((p.0[i][j] - target).abs());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &Rot3) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `W = Rz(yaw)·Ry(−pitch)·Rx(roll)`; maps `(1,0,0)` (frame center) onto the
/// viewport's view direction.
pub fn rotation_from_viewport(vp: &Viewport) -> Rot3 {
    Rot3::about_z(vp.yaw)
        .mul(&Rot3::about_y(-vp.pitch))
        .mul(&Rot3::about_x(vp.roll))
}

/// Pixel position to a direction. Longitude `2π·u/width − π`, colatitude
/// `π·v/height`; `v` is clamped to `[0, height]`.
pub fn plane_to_sphere(u_px: f64, v_px: f64, width: usize, height: usize) -> UnitVec3 {
    let lon = TAU * u_px / width as f64 - PI;
    let colat = PI * v_px.clamp(0.0, height as f64) / height as f64;
    let (sl, cl) = lon.sin_cos();
    let (sv, cv) = colat.sin_cos();
    UnitVec3 {
        x: cl * sv,
        y: sl * sv,
        z: cv,
    }
}

/// Direction to pixel position, `u ∈ [0, width)`, `v ∈ [0, height]`. At the
/// poles `u` is pinned to `width/2`.
pub fn sphere_to_plane(d: &UnitVec3, width: usize, height: usize) -> Result<(f64, f64), GeometryError> {
    let n = d.norm();
    if !((n - 1.0).abs() <= 1e-6) {
        return Err(GeometryError::NotUnit(n));
    }
    Ok(sphere_to_plane_unchecked(d.as_array(), width as f64, height as f64))
}

#[inline]
fn sphere_to_plane_unchecked(d: [f64; 3], width: f64, height: f64) -> (f64, f64) {
    let [x, y, z] = d;
    // Colatitude as atan2(ρ, z): equal to acos(z) on the unit sphere, but
    // keeps full precision next to the poles.
    let rho = (x * x + y * y).sqrt();
    let v = rho.atan2(z) * height / PI;
    if rho == 0.0 {
        return (width / 2.0, v);
    }
    let mut u = (y.atan2(x) / TAU + 0.5) * width;
    if u >= width {
        u -= width;
    }
    if u < 0.0 {
        u += width;
    }
    (u, v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    Nearest,
    #[default]
    Bilinear,
}

impl std::str::FromStr for Sampling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nearest" => Ok(Sampling::Nearest),
            "bilinear" => Ok(Sampling::Bilinear),
            other => Err(format!("unknown sampling {other:?} (expected nearest or bilinear)")),
        }
    }
}

/// Recenters `vp` at the middle of the frame.
pub fn reproject(frame: &Frame, vp: &Viewport, sampling: Sampling) -> Frame {
    remap(frame, &rotation_from_viewport(vp), frame.full_rect(), sampling)
}

/// Undoes [`reproject`] by rotating with `Wᵀ`.
pub fn inverse_reproject(frame: &Frame, vp: &Viewport, sampling: Sampling) -> Frame {
    remap(frame, &rotation_from_viewport(vp).transpose(), frame.full_rect(), sampling)
}

/// [`reproject`] with the rows split across the rayon pool. Produces the same
/// bytes as the sequential version.
pub fn reproject_par(frame: &Frame, vp: &Viewport, sampling: Sampling) -> Frame {
    remap_par(frame, &rotation_from_viewport(vp), frame.full_rect(), sampling)
}

/// Rotational remap restricted to the output rectangle `out`: every output
/// pixel center `p` reads the source at `sphere_to_plane(rot · plane_to_sphere(p))`.
/// The result has the size of `out`.
///
/// Panics if `out` does not fit inside the frame.
pub fn remap(frame: &Frame, rot: &Rot3, out: Rect, sampling: Sampling) -> Frame {
    let table = Trig::new(frame.width(), frame.height(), out);
    let mut data = vec![0u8; 3 * out.area()];
    for (j, row) in data.chunks_exact_mut(3 * out.w).enumerate() {
        remap_row(frame, rot, &table, j, sampling, row);
    }
    Frame::from_raw(out.w, out.h, data).expect("output sized from rect")
}

pub fn remap_par(frame: &Frame, rot: &Rot3, out: Rect, sampling: Sampling) -> Frame {
    let table = Trig::new(frame.width(), frame.height(), out);
    let mut data = vec![0u8; 3 * out.area()];
    data.par_chunks_exact_mut(3 * out.w)
        .enumerate()
        .for_each(|(j, row)| remap_row(frame, rot, &table, j, sampling, row));
    Frame::from_raw(out.w, out.h, data).expect("output sized from rect")
}

/// Per-column and per-row sines/cosines of the output pixel centers.
struct Trig {
    cols: Vec<(f64, f64)>,
    rows: Vec<(f64, f64)>,
}

impl Trig {
    fn new(width: usize, height: usize, out: Rect) -> Self {
        assert!(
            out.w >= 1 && out.h >= 1 && out.x1() <= width && out.y1() <= height,
            "remap rect {out:?} outside {width}x{height} frame"
        );
        let cols = (out.x0..out.x1())
            .map(|i| (TAU * (i as f64 + 0.5) / width as f64 - PI).sin_cos())
            .collect();
        let rows = (out.y0..out.y1())
            .map(|j| (PI * (j as f64 + 0.5) / height as f64).sin_cos())
            .collect();
        Trig { cols, rows }
    }
}

fn remap_row(frame: &Frame, rot: &Rot3, table: &Trig, j: usize, sampling: Sampling, row: &mut [u8]) {
    let (w, h) = (frame.width() as f64, frame.height() as f64);
    let (sv, cv) = table.rows[j];
    for (i, &(sl, cl)) in table.cols.iter().enumerate() {
        let d = rot.apply([cl * sv, sl * sv, cv]);
        let (u, v) = sphere_to_plane_unchecked(d, w, h);
        let px = match sampling {
            Sampling::Nearest => sample_nearest(frame, u, v),
            Sampling::Bilinear => sample_bilinear(frame, u, v),
        };
        row[3 * i..3 * i + 3].copy_from_slice(&px);
    }
}

#[inline]
fn sample_nearest(frame: &Frame, u: f64, v: f64) -> [u8; 3] {
    let w = frame.width();
    let x = (u.floor() as isize).rem_euclid(w as isize) as usize;
    let y = (v.floor().max(0.0) as usize).min(frame.height() - 1);
    frame.pixel(x, y)
}

/// Bilinear sample at continuous position `(u, v)` with pixel centers at
/// half-integers; wraps horizontally, clamps vertically.
#[inline]
fn sample_bilinear(frame: &Frame, u: f64, v: f64) -> [u8; 3] {
    let (w, h) = (frame.width(), frame.height());
    let x = u - 0.5;
    let xf = x.floor();
    let tx = x - xf;
    let x0 = (xf as isize).rem_euclid(w as isize) as usize;
    let x1 = if x0 + 1 == w { 0 } else { x0 + 1 };
    let y = (v - 0.5).clamp(0.0, (h - 1) as f64);
    let yf = y.floor();
    let ty = y - yf;
    let y0 = yf as usize;
    let y1 = (y0 + 1).min(h - 1);
    let bytes = frame.as_bytes();
    let (r0, r1) = (3 * w * y0, 3 * w * y1);
    let mut out = [0u8; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let a = bytes[r0 + 3 * x0 + c] as f64;
        let b = bytes[r0 + 3 * x1 + c] as f64;
        let cc = bytes[r1 + 3 * x0 + c] as f64;
        let d = bytes[r1 + 3 * x1 + c] as f64;
        let top = a + (b - a) * tx;
        let bottom = cc + (d - cc) * tx;
        *o = crate::imagery::round_u8(top + (bottom - top) * ty);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: [f64; 3], b: [f64; 3], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn plane_to_sphere_landmarks() {
        let (w, h) = (3840, 2048);
        assert!(close(plane_to_sphere(1920.0, 1024.0, w, h).as_array(), [1.0, 0.0, 0.0], 1e-15));
        assert!(close(plane_to_sphere(0.0, 1024.0, w, h).as_array(), [-1.0, 0.0, 0.0], 1e-15));
        for u in [0.0, 17.3, 3000.0] {
            assert_eq!(plane_to_sphere(u, 0.0, w, h).z, 1.0);
            assert!(close(plane_to_sphere(u, 0.0, w, h).as_array(), [0.0, 0.0, 1.0], 1e-15));
        }
    }

    #[test]
    fn sphere_to_plane_landmarks() {
        let (w, h) = (3840, 2048);
        let c = UnitVec3 { x: 1.0, y: 0.0, z: 0.0 };
        assert_eq!(sphere_to_plane(&c, w, h).unwrap(), (1920.0, 1024.0));
        let pole = UnitVec3 { x: 0.0, y: 0.0, z: 1.0 };
        assert_eq!(sphere_to_plane(&pole, w, h).unwrap(), (1920.0, 0.0));
        let bad = UnitVec3 { x: 1.1, y: 0.0, z: 0.0 };
        assert!(matches!(sphere_to_plane(&bad, w, h), Err(GeometryError::NotUnit(_))));
        let nan = UnitVec3 { x: f64::NAN, y: 0.0, z: 0.0 };
        assert!(sphere_to_plane(&nan, w, h).is_err());
    }

    #[test]
    fn rotation_landmarks() {
        assert_eq!(rotation_from_viewport(&Viewport::default()), Rot3::IDENTITY);
        let w = rotation_from_viewport(&Viewport::new(FRAC_PI_2, 0.0, 0.0));
        assert!(close(w.apply([1.0, 0.0, 0.0]), [0.0, 1.0, 0.0], 1e-15));
        let w = rotation_from_viewport(&Viewport::new(0.0, FRAC_PI_2, 0.0));
        assert!(close(w.apply([1.0, 0.0, 0.0]), [0.0, 0.0, 1.0], 1e-15));
    }

    #[test]
    fn wrap_angle_ranges() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + FRAC_PI_2).abs() < 1e-15);
        assert_eq!(wrap_angle(0.25), 0.25);
    }

    #[test]
    fn sampling_parses() {
        assert_eq!("nearest".parse::<Sampling>(), Ok(Sampling::Nearest));
        assert!("cubic".parse::<Sampling>().is_err());
    }

    #[test]
    fn identity_reprojection_is_exact() {
        let f = Frame::from_fn(48, 24, |x, y| [(x * 5) as u8, (y * 9) as u8, (x * y) as u8]).unwrap();
        for s in [Sampling::Nearest, Sampling::Bilinear] {
            assert_eq!(reproject(&f, &Viewport::default(), s), f);
            assert_eq!(inverse_reproject(&f, &Viewport::default(), s), f);
        }
    }

    #[test]
    fn constant_frame_stays_constant() {
        let f = Frame::filled(36, 20, [12, 200, 77]).unwrap();
        let vp = Viewport::new(0.7, -0.4, 1.1);
        for s in [Sampling::Nearest, Sampling::Bilinear] {
            assert_eq!(reproject(&f, &vp, s), f);
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let f = Frame::from_fn(60, 30, |x, y| [(x * 4) as u8, (y * 8) as u8, ((x + y) * 3) as u8]).unwrap();
        let vp = Viewport::new(-2.0, 0.3, 0.2);
        assert_eq!(reproject_par(&f, &vp, Sampling::Bilinear), reproject(&f, &vp, Sampling::Bilinear));
    }

    #[test]
    fn remap_subrect_matches_full_crop() {
        let f = Frame::from_fn(60, 30, |x, y| [(x * 4) as u8, (y * 8) as u8, 1]).unwrap();
        let rot = rotation_from_viewport(&Viewport::new(1.0, 0.5, -0.3));
        let r = Rect::new(20, 7, 20, 15);
        let full = remap(&f, &rot, f.full_rect(), Sampling::Bilinear);
        assert_eq!(remap(&f, &rot, r, Sampling::Bilinear), crate::imagery::crop(&full, r).unwrap());
    }

    proptest! {
        #[test]
        fn rotations_are_proper(yaw in -PI..PI, pitch in -FRAC_PI_2..FRAC_PI_2, roll in -PI..PI) {
            let vp = Viewport::new(yaw, pitch, roll);
            let w = rotation_from_viewport(&vp);
            prop_assert!(w.orthonormality_residual() < 1e-9);
            prop_assert!((w.det() - 1.0).abs() < 1e-9);
            prop_assert!(close(w.apply([1.0, 0.0, 0.0]), vp.direction().as_array(), 1e-12));
        }

        #[test]
        fn plane_sphere_round_trip(u in -50.0f64..900.0, v in 0.01f64..511.99) {
            let (w, h) = (800, 512);
            let (u2, v2) = sphere_to_plane(&plane_to_sphere(u, v, w, h), w, h).unwrap();
            let du = (u2 - u.rem_euclid(w as f64)).abs();
            prop_assert!(du.min(w as f64 - du) < 1e-9, "u {} -> {}", u, u2);
            prop_assert!((v2 - v).abs() < 1e-9);
        }
    }
}
