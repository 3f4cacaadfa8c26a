use std::collections::VecDeque;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::measurement::VelocityMeasurement;
use super::EstimationError;
use crate::kinematics::{wrap, Posture, RobotGeometry};
use crate::sim::{SensorNoise, SensorRates};

pub type Vec5 = SVector<f64, 5>;
pub type Mat5 = SMatrix<f64, 5, 5>;

const X: usize = 0;
const Y: usize = 1;
const TH: usize = 2;
const V: usize = 3;
const W: usize = 4;

// Variance floors (mm²/s², rad²/s²) for the gap between an interval-average
// velocity and the end-of-interval state.
const V_FLOOR: f64 = 16.0;
const W_FLOOR: f64 = 1e-3;

/// Filter tuning. Covariances are given as diagonals: `q` per second over
/// `(x, y, θ, v, ω)`, `r_base` over `(v_enc, ω_enc, v_flow, ω_flow, θ_gyro)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EkfConfig {
    pub q: [f64; 5],
    pub r_base: [f64; 5],
    /// mm/s
    pub slip_threshold: f64,
    pub slip_inflation: f64,
    pub slip_window: usize,
    pub initial_cov: [f64; 5],
}

impl Default for EkfConfig {
    fn default() -> Self {
        EkfConfig::derived(
            &SensorNoise::default(),
            &RobotGeometry::default(),
            &SensorRates::default(),
            0.07,
        )
    }
}

impl EkfConfig {
    /// Measurement variances implied by the sensor models for reports
    /// `dt_nominal` seconds apart: counter quantization at both ends plus the
    /// integrated per-sample noise, floored to absorb model mismatch.
    pub fn derived(noise: &SensorNoise, geom: &RobotGeometry, rates: &SensorRates, dt_nominal: f64) -> Self {
        let dt2 = dt_nominal * dt_nominal;
        let enc = geom.mm_per_tick.powi(2) / 6.0 + noise.encoder_sigma.powi(2) * dt_nominal / rates.encoder_hz;
        let flow = 0.01 / 6.0 + noise.flow_sigma.powi(2) * dt_nominal / rates.flow_hz;
        let gyro = noise.gyro_sigma.powi(2) + 1e-6 / 12.0;
        EkfConfig {
            q: [1.0, 1.0, 1e-4, 25.0, 1e-2],
            r_base: [
                (enc / (2.0 * dt2)).max(V_FLOOR),
                (2.0 * enc / (geom.wheel_base.powi(2) * dt2)).max(W_FLOOR),
                (flow / (2.0 * dt2)).max(V_FLOOR),
                (2.0 * flow / (geom.flow_sensor_separation.powi(2) * dt2)).max(W_FLOOR),
                gyro.max(1e-6),
            ],
            slip_threshold: 20.0,
            slip_inflation: 100.0,
            slip_window: 5,
            initial_cov: [1.0, 1.0, 1e-4, 180.0 * 180.0, 16.0],
        }
    }

    pub fn validate(&self) -> Result<(), EstimationError> {
        let bad = |m: &str| Err(EstimationError::InvalidConfig(m.into()));
        if self.q.iter().any(|v| !(*v >= 0.0)) || self.initial_cov.iter().any(|v| !(*v >= 0.0)) {
            return bad("q and initial_cov entries must be >= 0");
        }
        if self.r_base.iter().any(|v| !(*v > 0.0)) {
            return bad("r_base entries must be > 0");
        }
        if !(self.slip_threshold > 0.0) {
            return bad("slip_threshold must be > 0");
        }
        if !(self.slip_inflation >= 1.0) {
            return bad("slip_inflation must be >= 1");
        }
        if self.slip_window == 0 {
            return bad("slip_window must be >= 1");
        }
        Ok(())
    }

    /// Same filter with slip inflation switched off.
    pub fn non_adaptive(&self) -> Self {
        EkfConfig {
            slip_inflation: 1.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EkfBelief {
    pub mean: Vec5,
    pub cov: Mat5,
}

impl EkfBelief {
    pub fn new(pose: Posture, cfg: &EkfConfig) -> Self {
        EkfBelief {
            mean: Vec5::new(pose.x, pose.y, pose.theta, 0.0, 0.0),
            cov: Mat5::from_diagonal(&Vec5::from(cfg.initial_cov)),
        }
    }

    pub fn pose(&self) -> Posture {
        Posture::new(self.mean[X], self.mean[Y], self.mean[TH])
    }
}

fn symmetrize(m: &Mat5) -> Mat5 {
    (m + m.transpose()) * 0.5
}

/// Jacobian of the constant-velocity unicycle transition at `mean`.
pub fn transition_jacobian(mean: &Vec5, dt: f64) -> Mat5 {
    let (s, c) = (mean[TH] + 0.5 * mean[W] * dt).sin_cos();
    let v = mean[V];
    let mut f = Mat5::identity();
    f[(X, TH)] = -v * dt * s;
    f[(X, V)] = dt * c;
    f[(X, W)] = -v * dt * s * 0.5 * dt;
    f[(Y, TH)] = v * dt * c;
    f[(Y, V)] = dt * s;
    f[(Y, W)] = v * dt * c * 0.5 * dt;
    f[(TH, W)] = dt;
    f
}

// Position advances along the mid-interval heading.
pub(crate) fn transition(mean: &Vec5, dt: f64) -> Vec5 {
    let (s, c) = (mean[TH] + 0.5 * mean[W] * dt).sin_cos();
    let v = mean[V];
    Vec5::new(
        mean[X] + v * dt * c,
        mean[Y] + v * dt * s,
        wrap(mean[TH] + mean[W] * dt),
        v,
        mean[W],
    )
}

pub fn ekf_predict(b: &EkfBelief, dt: f64, cfg: &EkfConfig) -> Result<EkfBelief, EstimationError> {
    if !(dt > 0.0) {
        return Err(EstimationError::BadDt(dt));
    }
    let f = transition_jacobian(&b.mean, dt);
    let q = Mat5::from_diagonal(&Vec5::from(cfg.q)) * dt;
    Ok(EkfBelief {
        mean: transition(&b.mean, dt),
        cov: symmetrize(&(f * b.cov * f.transpose() + q)),
    })
}

fn observation_matrix() -> Mat5 {
    let mut h = Mat5::zeros();
    h[(0, V)] = 1.0;
    h[(1, W)] = 1.0;
    h[(2, V)] = 1.0;
    h[(3, W)] = 1.0;
    h[(4, TH)] = 1.0;
    h
}

/// Fuse one full measurement (all five channels). While `slip` is set the
/// encoder variances are multiplied by `slip_inflation`.
pub fn ekf_update(
    b: &EkfBelief,
    m: &VelocityMeasurement,
    slip: bool,
    cfg: &EkfConfig,
) -> Result<EkfBelief, EstimationError> {
    update_rows(b, m, slip, cfg, &[0, 1, 2, 3, 4])
}

/// Fuse only the encoder and flow velocities.
pub fn ekf_update_velocity(
    b: &EkfBelief,
    m: &VelocityMeasurement,
    slip: bool,
    cfg: &EkfConfig,
) -> Result<EkfBelief, EstimationError> {
    update_rows(b, m, slip, cfg, &[0, 1, 2, 3])
}

/// Fuse only the gyro heading.
pub fn ekf_update_heading(b: &EkfBelief, theta_gyro: f64, cfg: &EkfConfig) -> Result<EkfBelief, EstimationError> {
    let m = VelocityMeasurement {
        theta_gyro,
        ..Default::default()
    };
    update_rows(b, &m, false, cfg, &[4])
}

// Rows are independent (diagonal R), so fusing a subset is the joint update
// restricted to those channels.
fn update_rows(
    b: &EkfBelief,
    m: &VelocityMeasurement,
    slip: bool,
    cfg: &EkfConfig,
    rows: &[usize],
) -> Result<EkfBelief, EstimationError> {
    let n = rows.len();
    let full_h = observation_matrix();
    let z_full = [m.v_enc, m.w_enc, m.v_flow, m.w_flow, m.theta_gyro];
    let mut r_full = cfg.r_base;
    if slip {
        r_full[0] *= cfg.slip_inflation;
        r_full[1] *= cfg.slip_inflation;
    }
    let mut h = nalgebra::DMatrix::<f64>::zeros(n, 5);
    let mut innov = nalgebra::DVector::<f64>::zeros(n);
    let mut r = nalgebra::DMatrix::<f64>::zeros(n, n);
    for (i, &row) in rows.iter().enumerate() {
        h.set_row(i, &full_h.row(row));
        let pred = (full_h.row(row) * b.mean)[0];
        innov[i] = if row == 4 {
            wrap(z_full[4] - b.mean[TH])
        } else {
            z_full[row] - pred
        };
        r[(i, i)] = r_full[row];
    }
    let p = nalgebra::DMatrix::from_column_slice(5, 5, b.cov.as_slice());
    let s = &h * &p * h.transpose() + &r;
    let s_inv = s
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or(EstimationError::SingularInnovation)?;
    let k = &p * h.transpose() * s_inv;
    let dmean = &k * innov;
    let mut mean = b.mean + Vec5::from_column_slice(dmean.as_slice());
    mean[TH] = wrap(mean[TH]);
    let ikh = nalgebra::DMatrix::<f64>::identity(5, 5) - &k * &h;
    let cov = &ikh * &p * ikh.transpose() + &k * &r * k.transpose();
    Ok(EkfBelief {
        mean,
        cov: symmetrize(&Mat5::from_column_slice(cov.as_slice())),
    })
}

/// Debounced slip flag: set while `|v_enc − v_flow|` exceeds the threshold in
/// a strict majority of the last `window` measurements.
#[derive(Debug, Clone)]
pub struct SlipDetector {
    threshold: f64,
    window: usize,
    history: VecDeque<bool>,
}

impl SlipDetector {
    pub fn new(cfg: &EkfConfig) -> Self {
        SlipDetector {
            threshold: cfg.slip_threshold,
            window: cfg.slip_window,
            history: VecDeque::with_capacity(cfg.slip_window),
        }
    }

    pub fn push(&mut self, m: &VelocityMeasurement) -> bool {
        if self.history.len() == self.window {
            self.history.pop_front();
        }
        self.history.push_back((m.v_enc - m.v_flow).abs() > self.threshold);
        self.active()
    }

    pub fn active(&self) -> bool {
        2 * self.history.iter().filter(|b| **b).count() > self.window
    }
}
