use serde::{Deserialize, Serialize};

use super::SimError;
use crate::kinematics::{arc_step, wheels_to_twist, Posture, RobotGeometry, WheelSpeeds};

/// Wheel speed loop: PI on the velocity error with command feedforward,
/// driving a first-order motor lag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PiGains {
    pub kp: f64,
    pub ki: f64,
    /// Motor time constant (s).
    pub tau: f64,
}

impl Default for PiGains {
    fn default() -> Self {
        PiGains {
            kp: 0.8,
            ki: 2.0,
            tau: 0.05,
        }
    }
}

/// How wheel commands reach the wheels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Actuation {
    /// Wheels follow the saturated command instantly.
    Ideal,
    PiLoop(PiGains),
}

impl Default for Actuation {
    fn default() -> Self {
        Actuation::PiLoop(PiGains::default())
    }
}

/// Ground-truth state of one robot's drive.
///
/// Besides the pose it carries the cumulative wheel-surface and ground
/// odometers that the sensor models difference.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    pub truth: Posture,
    pub wheel_actual: WheelSpeeds,
    pub wheel_command: WheelSpeeds,
    pub integrator: WheelSpeeds,
    /// Simulation clock in microseconds.
    pub time_us: u64,
    pub slip_active: bool,
    /// Cumulative wheel-surface travel (mm): `v1` right, `v2` left.
    pub wheel_travel: WheelSpeeds,
    /// Cumulative signed path length over the ground (mm).
    pub ground_travel: f64,
    /// Cumulative unwrapped rotation over the ground (rad).
    pub ground_rotation: f64,
}

impl PlantState {
    pub fn at(truth: Posture) -> Self {
        PlantState {
            truth,
            ..Default::default()
        }
    }

    pub fn time_ms(&self) -> u64 {
        self.time_us / 1000
    }

    pub fn time_s(&self) -> f64 {
        self.time_us as f64 * 1e-6
    }
}

fn pi_axis(command: f64, actual: f64, integ: f64, g: &PiGains, v_max: f64, dt: f64) -> (f64, f64) {
    let err = command - actual;
    let raw = command + g.kp * err + g.ki * integ;
    let drive = raw.clamp(-v_max, v_max);
    // conditional integration: hold the integrator while saturated and the
    // error would push further into the limit
    let saturated = raw != drive && err.signum() == raw.signum();
    let integ = if saturated { integ } else { integ + err * dt };
    let alpha = 1.0 - (-dt / g.tau).exp();
    let next = (actual + alpha * (drive - actual)).clamp(-v_max, v_max);
    (next, integ)
}

/// One step of the per-wheel speed loop.
pub fn wheel_pi_step(state: &PlantState, gains: &PiGains, v_max: f64, dt: f64) -> Result<PlantState, SimError> {
    if !(dt > 0.0) {
        return Err(SimError::BadDt(dt));
    }
    let c = state.wheel_command;
    let a = state.wheel_actual;
    let i = state.integrator;
    let (a1, i1) = pi_axis(c.v1, a.v1, i.v1, gains, v_max, dt);
    let (a2, i2) = pi_axis(c.v2, a.v2, i.v2, gains, v_max, dt);
    Ok(PlantState {
        wheel_actual: WheelSpeeds::new(a1, a2),
        integrator: WheelSpeeds::new(i1, i2),
        ..*state
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlipMode {
    /// Wheels spin, the body does not move.
    Stuck,
    /// Ground speed is `factor` × wheel speed.
    Scale,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlipInterval {
    pub start_ms: u64,
    pub end_ms: u64,
    pub mode: SlipMode,
    #[serde(default)]
    pub factor: f64,
}

/// Non-overlapping slip intervals, `[start, end)` in milliseconds.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SlipSchedule(pub Vec<SlipInterval>);

impl SlipSchedule {
    pub fn none() -> Self {
        SlipSchedule(Vec::new())
    }

    pub fn stuck(start_ms: u64, end_ms: u64) -> Self {
        SlipSchedule(vec![SlipInterval {
            start_ms,
            end_ms,
            mode: SlipMode::Stuck,
            factor: 0.0,
        }])
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let mut sorted = self.0.clone();
        sorted.sort_by_key(|s| s.start_ms);
        for s in &sorted {
            if s.start_ms >= s.end_ms {
                return Err(SimError::InvalidSlip(format!(
                    "interval {}..{} is empty",
                    s.start_ms, s.end_ms
                )));
            }
            if !(0.0..=1.0).contains(&s.factor) {
                return Err(SimError::InvalidSlip(format!("factor {} outside [0, 1]", s.factor)));
            }
        }
        for w in sorted.windows(2) {
            if w[1].start_ms < w[0].end_ms {
                return Err(SimError::InvalidSlip("overlapping intervals".into()));
            }
        }
        Ok(())
    }

    /// Ground-contact fraction of wheel speed at `time_us`, if slipping.
    pub fn ground_factor(&self, time_us: u64) -> Option<f64> {
        self.0
            .iter()
            .find(|s| time_us >= s.start_ms * 1000 && time_us < s.end_ms * 1000)
            .map(|s| match s.mode {
                SlipMode::Stuck => 0.0,
                SlipMode::Scale => s.factor,
            })
    }
}

/// Largest accepted plant step (s).
pub const MAX_PLANT_DT: f64 = 0.2;

/// Advance the true pose with the wheel speeds held over `dt`.
///
/// Encoders follow `wheel_actual`; the body follows the ground-contact speeds,
/// which differ from `wheel_actual` while a slip interval is active.
pub fn step_plant(
    state: &PlantState,
    slip: &SlipSchedule,
    geom: &RobotGeometry,
    dt: f64,
) -> Result<PlantState, SimError> {
    if !(dt > 0.0 && dt <= MAX_PLANT_DT) {
        return Err(SimError::BadDt(dt));
    }
    let factor = slip.ground_factor(state.time_us);
    let ground = state.wheel_actual.scaled(factor.unwrap_or(1.0));
    let twist = wheels_to_twist(ground, geom);
    let truth = arc_step(state.truth, twist, dt);
    let w = state.wheel_actual;
    Ok(PlantState {
        truth,
        time_us: state.time_us + (dt * 1e6).round() as u64,
        slip_active: factor.is_some(),
        wheel_travel: WheelSpeeds::new(state.wheel_travel.v1 + w.v1 * dt, state.wheel_travel.v2 + w.v2 * dt),
        ground_travel: state.ground_travel + twist.v * dt,
        ground_rotation: state.ground_rotation + twist.w * dt,
        ..*state
    })
}
