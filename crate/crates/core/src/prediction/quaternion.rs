use std::f64::consts::FRAC_PI_2;

use super::PredictionError;
use crate::geometry::{Rot3, Viewport};

const NORM_TOLERANCE: f64 = 1e-3;
/// `cos(pitch)` below this is treated as gimbal lock.
const GIMBAL_EPS: f64 = 1e-6;

/// Scalar-first unit quaternion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub q0: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

impl Quaternion {
    pub fn new(q0: f64, q1: f64, q2: f64, q3: f64) -> Self {
        Quaternion { q0, q1, q2, q3 }
    }

    pub fn norm(&self) -> f64 {
        (self.q0 * self.q0 + self.q1 * self.q1 + self.q2 * self.q2 + self.q3 * self.q3).sqrt()
    }

    /// Rescales to unit norm if the norm is within 1e-3 of 1.
    pub fn normalized(&self) -> Result<Quaternion, PredictionError> {
        let n = self.norm();
        if !((n - 1.0).abs() <= NORM_TOLERANCE) {
            return Err(PredictionError::QuaternionNorm(n));
        }
        Ok(Quaternion::new(self.q0 / n, self.q1 / n, self.q2 / n, self.q3 / n))
    }

    /// Rotation matrix of a unit quaternion.
    pub fn to_rotation(&self) -> Rot3 {
        let Quaternion { q0: w, q1: x, q2: y, q3: z } = *self;
        Rot3([
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ])
    }
}

/// Euler angles of a rotation matrix under the `Rz(yaw)·Ry(−pitch)·Rx(roll)`
/// convention. At gimbal lock roll is 0 and yaw carries the free angle.
pub fn rotation_to_viewport(r: &Rot3) -> Viewport {
    let m = &r.0;
    let cp = m[0][0].hypot(m[1][0]);
    if cp < GIMBAL_EPS {
        let pitch = FRAC_PI_2.copysign(m[2][0]);
        return Viewport::new((-m[0][1]).atan2(m[1][1]), pitch, 0.0);
    }
    Viewport::new(m[1][0].atan2(m[0][0]), m[2][0].atan2(cp), m[2][1].atan2(m[2][2]))
}

pub fn quat_to_viewport(q: &Quaternion) -> Result<Viewport, PredictionError> {
    Ok(rotation_to_viewport(&q.normalized()?.to_rotation()))
}
