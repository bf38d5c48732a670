//! Experiment runner for dipole-coupled two-level atoms: spec files,
//! parallel trajectory ensembles, CSV/JSON artifacts and the acceptance
//! suite. The physics lives in `dicke-core`.

pub mod config;
pub mod criteria;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod output;
pub mod plot;
pub mod runner;
pub mod stats;

pub use error::{Result, RunError};
