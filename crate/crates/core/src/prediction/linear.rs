use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::geometry::wrap_angle;

/// One of the three independently predicted orientation angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Angle {
    Yaw,
    Pitch,
    Roll,
}

impl Angle {
    pub const ALL: [Angle; 3] = [Angle::Yaw, Angle::Pitch, Angle::Roll];

    pub fn as_str(&self) -> &'static str {
        match self {
            Angle::Yaw => "yaw",
            Angle::Pitch => "pitch",
            Angle::Roll => "roll",
        }
    }

    /// Maps a value back into the angle's range: `(−π, π]` for yaw and roll,
    /// `[−π/2, π/2]` for pitch.
    pub fn wrap(&self, v: f64) -> f64 {
        match self {
            Angle::Pitch => v.clamp(-FRAC_PI_2, FRAC_PI_2),
            _ => wrap_angle(v),
        }
    }

    /// Whether the angle lives on a circle and must be unwrapped before
    /// regression.
    pub fn is_circular(&self) -> bool {
        !matches!(self, Angle::Pitch)
    }
}

impl std::fmt::Display for Angle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Shortest distance between two angles on the circle, in `[0, π]`.
pub fn angular_error(a: f64, b: f64) -> f64 {
    let d = (a - b).abs().rem_euclid(TAU);
    d.min(TAU - d).clamp(0.0, PI)
}

/// Least-squares line through `(i·dt, history[i])`, evaluated `horizon`
/// seconds after the last sample and wrapped into the angle's range.
pub fn lr_predict(history: &[f64], dt: f64, horizon: f64, angle: Angle) -> f64 {
    assert!(history.len() >= 2, "linear regression needs at least two samples");
    let n = history.len() as f64;
    let t_mean = dt * (n - 1.0) / 2.0;
    let y_mean = history.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &y) in history.iter().enumerate() {
        let tc = i as f64 * dt - t_mean;
        sxy += tc * (y - y_mean);
        sxx += tc * tc;
    }
    let slope = sxy / sxx;
    let t_target = (n - 1.0) * dt + horizon;
    angle.wrap(y_mean + slope * (t_target - t_mean))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn angular_error_landmarks() {
        assert_eq!(angular_error(0.0, 0.0), 0.0);
        assert!((angular_error(3.0, -3.0) - (TAU - 6.0)).abs() < 1e-12);
        assert!((angular_error(0.0, PI) - PI).abs() < 1e-15);
        assert!((angular_error(0.1, 0.1 + 4.0 * TAU) < 1e-12));
    }

    #[test]
    fn constant_history() {
        assert!((lr_predict(&[0.4; 30], 1.0 / 30.0, 1.0, Angle::Yaw) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn affine_history_is_exact() {
        let dt = 0.1;
        let h: Vec<f64> = (0..10).map(|i| 0.1 + 0.5 * (i as f64 * dt)).collect();
        let p = lr_predict(&h, dt, 1.0, Angle::Pitch);
        assert!((p - (0.1 + 0.5 * (0.9 + 1.0))).abs() < 1e-12);
    }

    #[test]
    fn output_is_wrapped() {
        let h = [3.0, 3.1, 3.2];
        let p = lr_predict(&h, 1.0, 1.0, Angle::Yaw);
        assert!((p - wrap_angle(3.3)).abs() < 1e-12 && p < 0.0);
        assert_eq!(lr_predict(&[1.0, 1.5], 1.0, 5.0, Angle::Pitch), FRAC_PI_2);
    }

    proptest! {
        #[test]
        fn error_is_bounded_and_symmetric(a in -20.0f64..20.0, b in -20.0f64..20.0) {
            let e = angular_error(a, b);
            prop_assert!((0.0..=PI).contains(&e));
            prop_assert!((e - angular_error(b, a)).abs() < 1e-12);
        }

        #[test]
        fn exact_on_affine(c in -1.0f64..1.0, m in -2.0f64..2.0, n in 2usize..40, horizon in 0.0f64..2.0) {
            let dt = 1.0 / 30.0;
            let h: Vec<f64> = (0..n).map(|i| c + m * i as f64 * dt).collect();
            let expect = c + m * ((n - 1) as f64 * dt + horizon);
            let got = lr_predict(&h, dt, horizon, Angle::Yaw);
            prop_assert!(angular_error(got, expect) < 1e-9);
        }
    }
}
