//! Planar postures, angle algebra and the differential-drive (unicycle) model.
//!
//! Units are fixed across the crate: millimetres, radians and seconds.
//! Headings are counter-clockwise positive and wrapped to `(-π, π]`.

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Below this turn angle (rad) over one step the arc solution switches to its
/// straight-line limit.
pub const ARC_EPSILON: f64 = 1e-9;

/// Default wheel speed limit (mm/s).
pub const DEFAULT_V_MAX: f64 = 180.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("non-finite angle {0}")]
    NonFiniteAngle(f64),
    #[error("negative time step {0} s")]
    NegativeDt(f64),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
}

/// Wrap an angle to `(-π, π]`. NaN and infinities pass through as NaN.
///
/// Values already in range are returned untouched, which makes the
/// operation exactly idempotent.
pub fn wrap(a: f64) -> f64 {
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

/// Checked variant of [`wrap`].
pub fn wrap_angle(a: f64) -> Result<f64, KinematicsError> {
    if !a.is_finite() {
        return Err(KinematicsError::NonFiniteAngle(a));
    }
    Ok(wrap(a))
}

/// Planar pose `(x, y, θ)` in mm / rad.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Posture {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Posture {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Posture {
            x,
            y,
            theta: wrap(theta),
        }
    }

    pub fn distance_to(&self, other: &Posture) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Apply a rigid transform: rotate by `angle` about the origin, then
    /// translate by `(tx, ty)`.
    pub fn transformed(&self, tx: f64, ty: f64, angle: f64) -> Posture {
        let (s, c) = angle.sin_cos();
        Posture::new(
            c * self.x - s * self.y + tx,
            s * self.x + c * self.y + ty,
            self.theta + angle,
        )
    }
}

impl fmt::Display for Posture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3} mm, {:.3} mm, {:.4} rad)", self.x, self.y, self.theta)
    }
}

/// Linear wheel-surface speeds: `v1` right wheel, `v2` left wheel (mm/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WheelSpeeds {
    pub v1: f64,
    pub v2: f64,
}

impl WheelSpeeds {
    pub const ZERO: WheelSpeeds = WheelSpeeds { v1: 0.0, v2: 0.0 };

    pub fn new(v1: f64, v2: f64) -> Self {
        WheelSpeeds { v1, v2 }
    }

    /// Component-wise clamp to `±v_max`.
    pub fn clamped(&self, v_max: f64) -> Self {
        WheelSpeeds {
            v1: self.v1.clamp(-v_max, v_max),
            v2: self.v2.clamp(-v_max, v_max),
        }
    }

    /// Uniform scaling so that neither wheel exceeds `v_max`. Keeps the ratio
    /// of `(v1 + v2)` to `(v1 - v2)`, i.e. the commanded path curvature.
    pub fn saturated(&self, v_max: f64) -> Self {
        let peak = self.v1.abs().max(self.v2.abs());
        if peak <= v_max || peak == 0.0 {
            return *self;
        }
        let s = v_max / peak;
        WheelSpeeds {
            v1: self.v1 * s,
            v2: self.v2 * s,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        WheelSpeeds {
            v1: self.v1 * factor,
            v2: self.v2 * factor,
        }
    }
}

/// Body twist: linear speed `v` (mm/s) and yaw rate `w` (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub v: f64,
    pub w: f64,
}

impl Twist {
    pub fn new(v: f64, w: f64) -> Self {
        Twist { v, w }
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.w.is_finite()
    }
}

/// Physical layout of one robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotGeometry {
    /// Distance between the wheels (mm).
    pub wheel_base: f64,
    /// Lateral distance between the two downward optical flow sensors (mm).
    pub flow_sensor_separation: f64,
    pub mm_per_tick: f64,
    /// Body-frame bearings of the five IR rangers (rad).
    pub ir_ray_angles: [f64; 5],
    pub ir_range_min: f64,
    pub ir_range_max: f64,
    pub v_max: f64,
    /// Radius of the body footprint, used by planning (mm).
    pub body_radius: f64,
}

impl Default for RobotGeometry {
    fn default() -> Self {
        let step = TAU / 5.0;
        RobotGeometry {
            wheel_base: 100.0,
            flow_sensor_separation: 60.0,
            mm_per_tick: 0.5,
            ir_ray_angles: [-2.0 * step, -step, 0.0, step, 2.0 * step],
            ir_range_min: 200.0,
            ir_range_max: 1500.0,
            v_max: DEFAULT_V_MAX,
            body_radius: 60.0,
        }
    }
}

impl RobotGeometry {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        let bad = |msg: &str| Err(KinematicsError::InvalidGeometry(msg.to_string()));
        if !(self.wheel_base > 0.0) {
            return bad("wheel_base must be > 0");
        }
        if !(self.flow_sensor_separation > 0.0) {
            return bad("flow_sensor_separation must be > 0");
        }
        if !(self.mm_per_tick > 0.0) {
            return bad("mm_per_tick must be > 0");
        }
        if !(self.ir_range_min >= 0.0 && self.ir_range_min < self.ir_range_max) {
            return bad("need 0 <= ir_range_min < ir_range_max");
        }
        if !(self.v_max > 0.0) {
            return bad("v_max must be > 0");
        }
        if !(self.body_radius >= 0.0) {
            return bad("body_radius must be >= 0");
        }
        if self.ir_ray_angles.iter().any(|a| !a.is_finite()) {
            return bad("ir_ray_angles must be finite");
        }
        Ok(())
    }

    pub fn twist_to_wheels(&self, t: Twist) -> WheelSpeeds {
        let half = 0.5 * self.wheel_base * t.w;
        WheelSpeeds::new(t.v + half, t.v - half)
    }
}

/// Forward kinematics of the differential drive.
pub fn wheels_to_twist(u: WheelSpeeds, geom: &RobotGeometry) -> Twist {
    Twist {
        v: 0.5 * (u.v1 + u.v2),
        w: (u.v1 - u.v2) / geom.wheel_base,
    }
}

/// Advance a posture under a constant twist for `dt` seconds using the
/// closed-form arc.
pub fn integrate_unicycle(p: Posture, t: Twist, dt: f64) -> Result<Posture, KinematicsError> {
    if !(dt >= 0.0) {
        return Err(KinematicsError::NegativeDt(dt));
    }
    Ok(arc_step(p, t, dt))
}

pub(crate) fn arc_step(p: Posture, t: Twist, dt: f64) -> Posture {
    let dtheta = t.w * dt;
    if dtheta.abs() > ARC_EPSILON {
        // (v/w)(sin θ1 − sin θ0) written as a chord along the mid heading;
        // same value, without the cancellation at small w.
        let half = 0.5 * dtheta;
        let chord = t.v * dt * half.sin() / half;
        let mid = p.theta + half;
        Posture::new(p.x + chord * mid.cos(), p.y + chord * mid.sin(), p.theta + dtheta)
    } else {
        let d = t.v * dt;
        Posture::new(p.x + d * p.theta.cos(), p.y + d * p.theta.sin(), p.theta + dtheta)
    }
}

/// Reference minus current posture, expressed in the current body frame.
pub fn error_posture(reference: &Posture, current: &Posture) -> Posture {
    let dx = reference.x - current.x;
    let dy = reference.y - current.y;
    let (s, c) = current.theta.sin_cos();
    Posture::new(c * dx + s * dy, -s * dx + c * dy, reference.theta - current.theta)
}
