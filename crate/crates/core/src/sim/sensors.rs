use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::plant::PlantState;
use super::world::World;
use crate::kinematics::{wrap, Posture, RobotGeometry};

/// Sensor noise levels. Velocity-type sigmas are white noise densities
/// applied per sample as `sigma · dt` of displacement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorNoise {
    /// mm/s
    pub encoder_sigma: f64,
    /// mm/s
    pub flow_sigma: f64,
    /// Multiplicative optical flow calibration error (1 = calibrated).
    pub flow_scale: f64,
    /// rad
    pub gyro_sigma: f64,
    /// mm
    pub ir_sigma: f64,
}

impl Default for SensorNoise {
    fn default() -> Self {
        SensorNoise {
            encoder_sigma: 2.0,
            flow_sigma: 50.0,
            flow_scale: 1.0,
            gyro_sigma: 0.005,
            ir_sigma: 1.0,
        }
    }
}

impl SensorNoise {
    pub fn noiseless() -> Self {
        SensorNoise {
            encoder_sigma: 0.0,
            flow_sigma: 0.0,
            flow_scale: 1.0,
            gyro_sigma: 0.0,
            ir_sigma: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), super::SimError> {
        let sig = [self.encoder_sigma, self.flow_sigma, self.gyro_sigma, self.ir_sigma];
        if sig.iter().any(|s| !(*s >= 0.0)) || !(self.flow_scale > 0.0) {
            return Err(super::SimError::InvalidNoise);
        }
        Ok(())
    }
}

/// Sampling rates (Hz) of the on-board sensors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorRates {
    pub encoder_hz: f64,
    pub flow_hz: f64,
    pub ir_hz: f64,
}

impl Default for SensorRates {
    fn default() -> Self {
        SensorRates {
            encoder_hz: 400.0,
            flow_hz: 1000.0,
            ir_hz: 25.0,
        }
    }
}

impl SensorRates {
    pub fn periods_us(&self) -> [u64; 3] {
        [self.encoder_hz, self.flow_hz, self.ir_hz].map(|hz| (1e6 / hz).round() as u64)
    }
}

pub(crate) fn gauss<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).map(|n| n.sample(rng)).unwrap_or(0.0)
    } else {
        0.0
    }
}

/// Encoder tick counts for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EncoderTicks {
    pub left: i64,
    pub right: i64,
}

/// Quantizes wheel travel into ticks, carrying the leftover fraction so no
/// displacement is lost between samples.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EncoderSampler {
    carry_left: f64,
    carry_right: f64,
}

impl EncoderSampler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Ticks for the wheel motion between two consecutive plant states. The
    /// encoders see wheel rotation, not ground motion.
    pub fn sample<R: Rng + ?Sized>(
        &mut self,
        prev: &PlantState,
        curr: &PlantState,
        geom: &RobotGeometry,
        sigma: f64,
        rng: &mut R,
    ) -> EncoderTicks {
        let dt = curr.time_s() - prev.time_s();
        let dr = curr.wheel_travel.v1 - prev.wheel_travel.v1 + gauss(rng, sigma * dt);
        let dl = curr.wheel_travel.v2 - prev.wheel_travel.v2 + gauss(rng, sigma * dt);
        let (right, cr) = quantize(self.carry_right + dr, geom.mm_per_tick);
        let (left, cl) = quantize(self.carry_left + dl, geom.mm_per_tick);
        self.carry_right = cr;
        self.carry_left = cl;
        EncoderTicks { left, right }
    }
}

fn quantize(total: f64, step: f64) -> (i64, f64) {
    let ticks = (total / step).round();
    (ticks as i64, total - ticks * step)
}

/// Longitudinal ground displacement seen by the left and right flow sensors (mm).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlowSample {
    pub dx_left: f64,
    pub dx_right: f64,
}

/// Flow sensors track the ground itself, so they are blind to wheel slip.
pub fn sample_optical_flow<R: Rng + ?Sized>(
    prev: &PlantState,
    curr: &PlantState,
    geom: &RobotGeometry,
    noise: &SensorNoise,
    rng: &mut R,
) -> FlowSample {
    let dt = curr.time_s() - prev.time_s();
    let ds = curr.ground_travel - prev.ground_travel;
    let dth = curr.ground_rotation - prev.ground_rotation;
    let half = 0.5 * geom.flow_sensor_separation * dth;
    FlowSample {
        dx_left: noise.flow_scale * (ds - half) + gauss(rng, noise.flow_sigma * dt),
        dx_right: noise.flow_scale * (ds + half) + gauss(rng, noise.flow_sigma * dt),
    }
}

pub fn sample_gyro_heading<R: Rng + ?Sized>(state: &PlantState, noise: &SensorNoise, rng: &mut R) -> f64 {
    wrap(state.truth.theta + gauss(rng, noise.gyro_sigma))
}

/// One IR ranger reading.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum IrReading {
    Range(f64),
    #[default]
    OutOfRange,
}

impl IrReading {
    pub fn range(&self) -> Option<f64> {
        match self {
            IrReading::Range(r) => Some(*r),
            IrReading::OutOfRange => None,
        }
    }
}

/// Cast the five IR rays. Surfaces closer than `ir_range_min` or beyond
/// `ir_range_max` are reported as out of range; nothing between two rays is
/// seen at all.
pub fn sample_ir<R: Rng + ?Sized>(
    pose: &Posture,
    world: &World,
    geom: &RobotGeometry,
    noise: &SensorNoise,
    rng: &mut R,
) -> [IrReading; 5] {
    geom.ir_ray_angles
        .map(|a| match world.ray_cast(pose.x, pose.y, pose.theta + a) {
            Some(d) if d >= geom.ir_range_min && d <= geom.ir_range_max => {
                IrReading::Range(d + gauss(rng, noise.ir_sigma))
            }
            _ => IrReading::OutOfRange,
        })
}
