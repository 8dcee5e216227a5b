//! Experiment runner behind the `ndsim` binary: config loading, single
//! runs, sweeps, theory evaluation and theory/simulation comparisons.

pub mod commands;
pub mod error;
pub mod specs;

pub use error::{CliError, CliResult};
