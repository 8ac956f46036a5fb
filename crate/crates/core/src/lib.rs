//! Simulation and design toolkit for a three-stage traveling-wave parametric
//! amplifier with passive reverse isolation.
//!
//! The stages are two flux-tunable nonlinear transmission lines built from
//! coupled asymmetric SQUIDs, separated by a reflectionless high-pass filter.
//! Signal gain in the filter stop-band is carried by the idler: stage one
//! converts the signal into an idler, the filter absorbs the signal, and
//! stage three regenerates the signal from the idler.
//!
//! Module map:
//! - [`device`]: circuit constants, dispersion and impedance of one stage.
//! - [`coupled_mode`]: four-wave-mixing coupled-mode theory and its gains.
//! - [`rf`]: two-port algebra, filter models and Touchstone I/O.
//! - [`cascade`]: forward gain, isolation and return loss of the full device.
//! - [`timedomain`]: transient simulation of the nonlinear ladder.
//! - [`noise`]: photon units, Y-factor fitting and back-action estimates.
//! - [`sweeps`]: phase matching, pump calibration and design sweeps.

pub mod cascade;
pub mod circuit;
pub mod config;
pub mod constants;
pub mod coupled_mode;
pub mod device;
pub mod error;
pub mod exec;
pub mod io;
pub mod linalg;
pub mod noise;
pub mod rf;
pub mod sweeps;
pub mod timedomain;
pub mod units;

pub use error::{Error, Result};
pub use exec::Exec;
