//! GPS-to-estimation data pipeline.
//!
//! Transforms raw GPS event streams into estimation-ready choice data:
//! trajectory screening, home/work anchor inference, spatial-temporal trip
//! clustering, transit journey decomposition, SP decision gating,
//! alternative generation through pluggable routing providers, cost
//! estimation, and weather/season enrichment. The bundled providers are
//! deterministic and synthetic so the whole pipeline runs offline.

pub mod alternatives;
pub mod anchors;
pub mod cluster;
pub mod context;
pub mod cost;
pub mod decompose;
pub mod error;
pub mod events;
pub mod fixtures;
pub mod providers;
pub mod run;
pub mod screen;
pub mod sp_gate;

pub use error::{PipelineError, Result};
