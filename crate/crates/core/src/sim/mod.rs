//! Ground-truth plant, fault injection and sensor emulation.

mod plant;
mod robot;
mod sensors;
mod world;

pub use plant::{
    step_plant, wheel_pi_step, Actuation, PiGains, PlantState, SlipInterval, SlipMode, SlipSchedule, MAX_PLANT_DT,
};
pub use robot::{RobotConfig, SendSchedule, SimRobot, TICK_US};
pub use sensors::{
    sample_gyro_heading, sample_ir, sample_optical_flow, EncoderSampler, EncoderTicks, FlowSample, IrReading,
    SensorNoise, SensorRates,
};
pub use world::{Rect, Segment, World};

use thiserror::Error;

use crate::kinematics::KinematicsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("time step {0} s out of range")]
    BadDt(f64),
    #[error("invalid slip schedule: {0}")]
    InvalidSlip(String),
    #[error("invalid sensor noise: sigmas must be >= 0 and flow_scale > 0")]
    InvalidNoise,
    #[error("invalid world: {0}")]
    InvalidWorld(String),
    #[error("invalid robot config: {0}")]
    InvalidRobot(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}
