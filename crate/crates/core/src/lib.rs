//! Deterministic simulation and algorithm toolkit for differential-drive
//! robot swarms.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod comms;
pub mod control;
pub mod estimation;
pub mod kinematics;
pub mod output;
pub mod planning;
pub mod runner;
pub mod scenario;
pub mod sim;
pub mod streams;
pub mod swarm;
