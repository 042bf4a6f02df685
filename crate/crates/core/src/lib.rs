//! Simulation and closed-form analysis of centralized, network-assisted
//! device-to-device discovery over underlay uplink spectrum.
//!
//! - [`geometry`]: Poisson point processes, serving-cell association, pair placement.
//! - [`channel`]: path loss, Rayleigh fading, log-normal shadowing, SIR.
//! - [`analytic`]: collision probability, interference Laplace transform, SIR
//!   tail, joint success probability, required slot count.
//! - [`protocol`]: the five-step signaling state machine and slotted channel access.
//! - [`montecarlo`]: seeded trials, empirical estimators, parameter sweeps.
//! - [`config`]: key-value experiment files and named presets.
//! - [`report`]: CSV output.

pub mod analytic;
pub mod channel;
pub mod config;
pub mod error;
pub mod geometry;
pub mod montecarlo;
pub mod protocol;
pub mod report;

pub use error::{Error, Result};
