//! Flood-risk assessment and house-elevation decisions under deep uncertainty.
//!
//! Pipeline: gage records ([`hydro`]) feed a Bayesian GEV hazard model
//! ([`hazard`]); historical rates feed autoregressive discounting models
//! ([`discount`]); both combine with the house and damage models
//! ([`exposure`]) into ensembles of states of the world ([`sow`]) over which
//! decision objectives ([`objectives`]), robustness ([`robustness`]) and
//! Sobol sensitivities ([`sensitivity`]) are computed.

pub mod analysis;
pub mod discount;
pub mod error;
pub mod exposure;
pub mod hazard;
pub mod hydro;
pub mod objectives;
pub mod rng;
pub mod robustness;
pub mod sensitivity;
pub mod sow;
pub mod stats;

pub use error::{Error, Result};
