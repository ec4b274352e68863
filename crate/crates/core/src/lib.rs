//! Model-free pH regulation for thin-layer photobioreactors with extremum
//! seeking control.
//!
//! The crate provides the controllers (classical ESC, detrending ESC with
//! feedforward and activation reset, on-off hysteresis baseline), a
//! deterministic surrogate reactor, frequency-response characterization,
//! performance metrics and a fixed-step closed-loop harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod cli;
pub mod detrend;
pub mod error;
pub mod esc;
pub mod harness;
pub mod irradiance;
pub mod metrics;
pub mod plant;
pub mod runlog;
pub mod scenario;
pub mod sysid;

pub use error::{Error, Result};
