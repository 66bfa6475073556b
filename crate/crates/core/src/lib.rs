//! Discrete choice estimation toolkit for travel mode choice.
//!
//! The crate covers the estimation side of a mode choice study end to end:
//!
//! - [`choice_data`]: the long-format domain model, ingestion, and
//!   validation;
//! - [`integration`]: the composite integration index;
//! - [`utility`]: systematic utility evaluation shared by every engine;
//! - [`mnl`] and [`mxl`]: fixed- and random-coefficient likelihoods, with
//!   Halton-simulated mixing for the latter;
//! - [`joint`]: pooling revealed- and stated-preference data under an SP
//!   scale;
//! - [`estimate`]: BFGS maximization, clustered sandwich covariance, and fit
//!   statistics;
//! - [`analysis`]: value of travel time and conditional parameters;
//! - [`validation`]: five-fold observation-level cross-validation;
//! - [`scenario`]: fare, access, and integration counterfactuals;
//! - [`synth`]: synthetic data for recovery experiments.

pub mod analysis;
pub mod choice_data;
pub mod error;
pub mod estimate;
pub mod halton;
pub mod integration;
pub mod joint;
pub mod mnl;
pub mod model_spec;
pub mod mxl;
pub mod presets;
pub mod report;
pub mod scenario;
pub mod synth;
pub mod utility;
pub mod validation;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{CoreError, Result};
