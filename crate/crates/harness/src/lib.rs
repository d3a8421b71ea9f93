//! Experiment grids, trace/summary output and named property-check suites on
//! top of `adagrad_lab`. The `adagrad-lab` binary is a thin CLI over this.

pub mod checks;
pub mod config;
pub mod error;
pub mod experiment;

pub use error::{HarnessError, Result};
