//! Reference trajectories with numerical feedforward, and the Lyapunov
//! trajectory-tracking controller for the differential drive.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{error_posture, wrap, Posture, RobotGeometry, WheelSpeeds};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("time {t} s outside trajectory span [{start}, {end}]")]
    OutOfSpan { t: f64, start: f64, end: f64 },
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("invalid gains: k_x, k_y and k_theta must all be > 0")]
    InvalidGains,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Gains {
    pub k_x: f64,
    pub k_y: f64,
    pub k_theta: f64,
}

impl Default for Gains {
    fn default() -> Self {
        Gains {
            k_x: 1.0,
            k_y: 1e-3,
            k_theta: 0.05,
        }
    }
}

impl Gains {
    pub fn validate(&self) -> Result<(), ControlError> {
        if self.k_x > 0.0 && self.k_y > 0.0 && self.k_theta > 0.0 {
            Ok(())
        } else {
            Err(ControlError::InvalidGains)
        }
    }
}

/// Time-stamped reference postures, interpolated linearly in position and
/// along the shortest arc in heading.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    t: Vec<f64>,
    pose: Vec<Posture>,
    v: Vec<f64>,
    w: Vec<f64>,
}

/// Sample spacing used by the built-in trajectory generators (s).
pub const SAMPLE_DT: f64 = 0.01;

impl ReferenceTrajectory {
    pub fn from_samples(samples: Vec<(f64, Posture)>) -> Result<Self, ControlError> {
        let bad = |m: String| Err(ControlError::InvalidTrajectory(m));
        if samples.len() < 2 {
            return bad("need at least two samples".into());
        }
        for (k, w) in samples.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) {
                return bad(format!("time not strictly increasing at sample {}", k + 1));
            }
            if wrap(w[1].1.theta - w[0].1.theta).abs() >= FRAC_PI_2 {
                return bad(format!("heading step of π/2 or more at sample {}", k + 1));
            }
        }
        let (t, pose): (Vec<f64>, Vec<Posture>) = samples.into_iter().unzip();
        let n = t.len();
        let mut v = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        for k in 0..n {
            // central differences, one-sided at the ends
            let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
            let dt = t[b] - t[a];
            let (dx, dy) = (pose[b].x - pose[a].x, pose[b].y - pose[a].y);
            let dist = dx.hypot(dy);
            // sign from the heading, so reversing references feed back negative speed
            let (s, c) = pose[k].theta.sin_cos();
            let sign = if dx * c + dy * s < 0.0 { -1.0 } else { 1.0 };
            v.push(sign * dist / dt);
            w.push(wrap(pose[b].theta - pose[a].theta) / dt);
        }
        Ok(ReferenceTrajectory { t, pose, v, w })
    }

    /// Sample `f` on `[0, duration]` every [`SAMPLE_DT`].
    pub fn sampled(duration: f64, f: impl Fn(f64) -> Posture) -> Result<Self, ControlError> {
        if !(duration > 0.0) {
            return Err(ControlError::InvalidTrajectory("duration must be > 0".into()));
        }
        let n = (duration / SAMPLE_DT).ceil() as usize;
        let samples = (0..=n)
            .map(|k| {
                let t = (k as f64 * SAMPLE_DT).min(duration);
                (t, f(t))
            })
            .collect();
        Self::from_samples(samples)
    }

    /// Counter-clockwise circle starting at `start` and heading along it.
    pub fn circle(start: Posture, radius: f64, speed: f64, duration: f64) -> Result<Self, ControlError> {
        if !(radius > 0.0) {
            return Err(ControlError::InvalidTrajectory("radius must be > 0".into()));
        }
        let (s, c) = start.theta.sin_cos();
        let (cx, cy) = (start.x - radius * s, start.y + radius * c);
        let omega = speed / radius;
        Self::sampled(duration, |t| {
            let th = start.theta + omega * t;
            Posture::new(cx + radius * th.sin(), cy - radius * th.cos(), th)
        })
    }

    pub fn straight(start: Posture, speed: f64, duration: f64) -> Result<Self, ControlError> {
        let (s, c) = start.theta.sin_cos();
        Self::sampled(duration, |t| {
            Posture::new(start.x + speed * t * c, start.y + speed * t * s, start.theta)
        })
    }

    pub fn stationary(at: Posture, duration: f64) -> Result<Self, ControlError> {
        Self::sampled(duration, |_| at)
    }

    /// Lemniscate-like figure eight through `start` with lobes of radius `size`.
    pub fn figure_eight(start: Posture, size: f64, period: f64, duration: f64) -> Result<Self, ControlError> {
        let om = std::f64::consts::TAU / period;
        let (s, c) = start.theta.sin_cos();
        let local = move |t: f64| {
            let x = size * (om * t).sin();
            let y = 0.5 * size * (2.0 * om * t).sin();
            let th = (size * om * (2.0 * om * t).cos()).atan2(size * om * (om * t).cos());
            (x, y, th)
        };
        Self::sampled(duration, |t| {
            let (x, y, th) = local(t);
            Posture::new(start.x + c * x - s * y, start.y + s * x + c * y, start.theta + th)
        })
    }

    pub fn start(&self) -> f64 {
        self.t[0]
    }

    pub fn end(&self) -> f64 {
        *self.t.last().expect("non-empty")
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, Posture)> + '_ {
        self.t.iter().copied().zip(self.pose.iter().copied())
    }
}

/// Reference posture and feedforward velocities at time `t`.
pub fn reference_at(traj: &ReferenceTrajectory, t: f64) -> Result<(Posture, f64, f64), ControlError> {
    let (start, end) = (traj.start(), traj.end());
    if !(t >= start && t <= end) {
        return Err(ControlError::OutOfSpan { t, start, end });
    }
    let k = traj.t.partition_point(|&s| s <= t).clamp(1, traj.t.len() - 1) - 1;
    let (t0, t1) = (traj.t[k], traj.t[k + 1]);
    let a = (t - t0) / (t1 - t0);
    let (p0, p1) = (traj.pose[k], traj.pose[k + 1]);
    let pose = Posture::new(
        p0.x + a * (p1.x - p0.x),
        p0.y + a * (p1.y - p0.y),
        p0.theta + a * wrap(p1.theta - p0.theta),
    );
    let v = traj.v[k] + a * (traj.v[k + 1] - traj.v[k]);
    let w = traj.w[k] + a * (traj.w[k + 1] - traj.w[k]);
    Ok((pose, v, w))
}

/// Wheel speeds from the tracking law, scaled down uniformly if either wheel
/// would exceed `v_max`.
pub fn tracking_control(
    p_r: &Posture,
    p_c: &Posture,
    v_r: f64,
    w_r: f64,
    gains: &Gains,
    geom: &RobotGeometry,
) -> WheelSpeeds {
    let e = error_posture(p_r, p_c);
    let v = v_r * e.theta.cos() + gains.k_x * e.x;
    let w = w_r + v_r * (gains.k_y * e.y + gains.k_theta * e.theta.sin());
    let half = 0.5 * geom.wheel_base * w;
    WheelSpeeds::new(v + half, v - half).saturated(geom.v_max)
}

pub fn lyapunov_value(e: &Posture) -> f64 {
    0.5 * (e.x * e.x + e.y * e.y) + (1.0 - e.theta.cos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{integrate_unicycle, wheels_to_twist};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn circle_feedforward() {
        let traj = ReferenceTrajectory::circle(Posture::new(0.0, 0.0, FRAC_PI_2), 1000.0, 100.0, 70.0).unwrap();
        let mut t = 0.0;
        while t <= 70.0 {
            let (p, v, w) = reference_at(&traj, t).unwrap();
            assert!((v - 100.0).abs() <= 0.1, "v {v} at {t}");
            assert!((w - 0.1).abs() <= 1e-4, "w {w} at {t}");
            // on the circle centred at (-1000, 0)
            assert_abs_diff_eq!((p.x + 1000.0).hypot(p.y), 1000.0, epsilon = 0.02);
            t += 0.137;
        }
    }

    #[test]
    fn straight_and_stationary_feedforward() {
        let traj = ReferenceTrajectory::straight(Posture::new(5.0, 5.0, 0.7), 120.0, 3.0).unwrap();
        for t in [0.0, 0.005, 1.234, 3.0] {
            let (_, v, w) = reference_at(&traj, t).unwrap();
            assert_abs_diff_eq!(v, 120.0, epsilon = 1e-9);
            assert_abs_diff_eq!(w, 0.0);
        }
        let traj = ReferenceTrajectory::stationary(Posture::new(1.0, 2.0, 3.0), 1.0).unwrap();
        let (p, v, w) = reference_at(&traj, 0.5).unwrap();
        assert_eq!((v, w), (0.0, 0.0));
        assert_abs_diff_eq!(p.theta, 3.0);
        assert!(matches!(reference_at(&traj, 1.5), Err(ControlError::OutOfSpan { .. })));
    }

    #[test]
    fn interpolation_crosses_the_angle_cut() {
        let traj = ReferenceTrajectory::from_samples(vec![
            (0.0, Posture::new(0.0, 0.0, PI - 0.1)),
            (1.0, Posture::new(0.0, 0.0, -PI + 0.1)),
        ])
        .unwrap();
        let (p, _, w) = reference_at(&traj, 0.5).unwrap();
        assert_abs_diff_eq!(p.theta.abs(), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(w, 0.2, epsilon = 1e-12);
        let bad = ReferenceTrajectory::from_samples(vec![(0.0, Posture::default()), (0.0, Posture::default())]);
        assert!(bad.is_err());
        let jump =
            ReferenceTrajectory::from_samples(vec![(0.0, Posture::default()), (1.0, Posture::new(0.0, 0.0, 2.0))]);
        assert!(jump.is_err());
    }

    #[test]
    fn control_examples() {
        let g = RobotGeometry::default();
        let k = Gains::default();
        let p = Posture::new(3.0, 4.0, 0.5);
        assert_eq!(
            tracking_control(&p, &p, 100.0, 0.0, &k, &g),
            WheelSpeeds::new(100.0, 100.0)
        );
        let u = tracking_control(&p, &p, 100.0, 1.0, &k, &g);
        assert_abs_diff_eq!(u.v1, 150.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u.v2, 50.0, epsilon = 1e-12);
        let kx1 = Gains { k_x: 1.0, ..k };
        let u = tracking_control(&Posture::new(10.0, 0.0, 0.0), &Posture::default(), 0.0, 0.0, &kx1, &g);
        assert_eq!(u, WheelSpeeds::new(10.0, 10.0));
    }

    #[test]
    fn lyapunov_examples() {
        assert_eq!(lyapunov_value(&Posture::default()), 0.0);
        assert_abs_diff_eq!(lyapunov_value(&Posture::new(0.0, 0.0, PI)), 2.0);
        assert_abs_diff_eq!(lyapunov_value(&Posture::new(3.0, 4.0, 0.0)), 12.5);
    }

    #[test]
    fn gains_validation() {
        assert!(Gains::default().validate().is_ok());
        assert!(Gains {
            k_y: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    /// Closed loop on the bare kinematic model, control held for 70 ms.
    fn closed_loop(
        traj: &ReferenceTrajectory,
        start: Posture,
        gains: &Gains,
        geom: &RobotGeometry,
    ) -> Vec<(f64, Posture)> {
        let mut p = start;
        let mut out = Vec::new();
        let mut t = 0.0;
        while t + 0.07 <= traj.end() {
            let (r, v, w) = reference_at(traj, t).unwrap();
            let e = error_posture(&r, &p);
            out.push((t, e));
            let u = tracking_control(&r, &p, v, w, gains, geom);
            for _ in 0..140 {
                p = integrate_unicycle(p, wheels_to_twist(u, geom), 0.0005).unwrap();
            }
            t += 0.07;
        }
        out
    }

    #[test]
    fn circle_converges_from_rest() {
        let g = RobotGeometry::default();
        let traj = ReferenceTrajectory::circle(Posture::new(0.0, 0.0, FRAC_PI_2), 1000.0, 100.0, 40.0).unwrap();
        let trace = closed_loop(&traj, Posture::default(), &Gains::default(), &g);
        for (t, e) in trace.iter().filter(|(t, _)| *t > 20.0) {
            assert!(e.x.abs() < 5.0 && e.y.abs() < 5.0 && e.theta.abs() < 0.02, "t {t}: {e}");
        }
    }

    #[test]
    fn lyapunov_descent_after_transient() {
        use rand::{Rng, SeedableRng};
        let g = RobotGeometry {
            v_max: 1e9,
            ..Default::default()
        };
        let traj = ReferenceTrajectory::circle(Posture::new(0.0, 0.0, FRAC_PI_2), 1000.0, 100.0, 30.0).unwrap();
        let (p_r, _, _) = reference_at(&traj, 0.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let r: f64 = rng.random_range(0.0..200.0);
            let a: f64 = rng.random_range(-PI..PI);
            let th: f64 = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
            // current posture placed so that the initial error is (r cos a, r sin a, th)
            let thc = wrap(p_r.theta - th);
            let (s, c) = thc.sin_cos();
            let (ex, ey) = (r * a.cos(), r * a.sin());
            let start = Posture::new(p_r.x - (c * ex - s * ey), p_r.y - (s * ex + c * ey), thc);
            assert!(error_posture(&p_r, &start).distance_to(&Posture::new(ex, ey, th)) < 1e-9);
            let trace = closed_loop(&traj, start, &Gains::default(), &g);
            let v: Vec<f64> = trace
                .iter()
                .filter(|(t, _)| *t > 20.0)
                .map(|(_, e)| lyapunov_value(e))
                .collect();
            for w in v.windows(2) {
                assert!(w[1] - w[0] < 1e-6, "V rose from {} to {}", w[0], w[1]);
            }
            let (_, e) = trace.iter().find(|(t, _)| *t > 20.0).unwrap();
            assert!(e.x.abs() < 5.0 && e.y.abs() < 5.0 && e.theta.abs() < 0.02);
        }
    }

    #[test]
    fn saturation_keeps_turn_direction() {
        let g = RobotGeometry::default();
        let big = Gains {
            k_x: 5.0,
            k_y: 0.05,
            k_theta: 5.0,
        };
        let u = tracking_control(
            &Posture::new(800.0, 300.0, 1.0),
            &Posture::default(),
            150.0,
            0.5,
            &big,
            &g,
        );
        assert!(u.v1.abs() <= 180.0 + 1e-9 && u.v2.abs() <= 180.0 + 1e-9);
    }

    fn posture() -> impl Strategy<Value = Posture> {
        (-2000.0f64..2000.0, -2000.0f64..2000.0, -PI..PI).prop_map(|(x, y, t)| Posture::new(x, y, t))
    }

    proptest! {
        #[test]
        fn rigid_motion_equivariance(r in posture(), c in posture(), v in -150.0f64..150.0, w in -2.0f64..2.0,
                                     tx in -1e3f64..1e3, ty in -1e3f64..1e3, a in -PI..PI) {
            let g = RobotGeometry::default();
            let k = Gains::default();
            let u = tracking_control(&r, &c, v, w, &k, &g);
            let u2 = tracking_control(&r.transformed(tx, ty, a), &c.transformed(tx, ty, a), v, w, &k, &g);
            let scale = u.v1.abs().max(u.v2.abs()).max(1.0);
            prop_assert!((u.v1 - u2.v1).abs() <= 1e-9 * scale);
            prop_assert!((u.v2 - u2.v2).abs() <= 1e-9 * scale);
        }

        #[test]
        fn saturation_preserves_turn_sign(r in posture(), c in posture(), v in -180.0f64..180.0, w in -4.0f64..4.0) {
            let g = RobotGeometry::default();
            let k = Gains::default();
            let e = error_posture(&r, &c);
            let vv = v * e.theta.cos() + k.k_x * e.x;
            let ww = w + v * (k.k_y * e.y + k.k_theta * e.theta.sin());
            let raw = (vv + 0.5 * g.wheel_base * ww) - (vv - 0.5 * g.wheel_base * ww);
            let u = tracking_control(&r, &c, v, w, &k, &g);
            prop_assert!(u.v1.abs() <= g.v_max + 1e-9 && u.v2.abs() <= g.v_max + 1e-9);
            prop_assert_eq!(raw.signum() == 0.0, (u.v1 - u.v2).signum() == 0.0);
            if raw != 0.0 {
                prop_assert_eq!(raw.signum(), (u.v1 - u.v2).signum());
            }
        }
    }
}
