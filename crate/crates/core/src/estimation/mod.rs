//! Localization: an EKF over `(x, y, θ, v, ω)` fed by encoder, optical flow
//! and gyro readings, with slip-adaptive measurement noise, plus open-loop
//! dead-reckoning baselines.

mod ekf;
mod localizer;
mod measurement;

pub use ekf::{
    ekf_predict, ekf_update, ekf_update_heading, ekf_update_velocity, transition_jacobian, EkfBelief, EkfConfig,
    SlipDetector, Vec5,
};
pub use localizer::{dead_reckon, DtSource, EstimateRecord, Localizer, VelocitySource};
pub use measurement::{measurement_from_packets, measurement_over, VelocityMeasurement};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("stale packet: t_sent {curr} ms does not follow {prev} ms")]
    StaleData { prev: u32, curr: u32 },
    #[error("time step {0} s must be > 0")]
    BadDt(f64),
    #[error("estimation fault: innovation covariance is singular")]
    SingularInnovation,
    #[error("invalid EKF config: {0}")]
    InvalidConfig(String),
}
