//! Experiment front end: configuration, run orchestration and CSV/SVG
//! artifacts for the QAOA control agent and its BFGS baseline.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod plot;

pub use config::{ExperimentConfig, Overrides};
pub use error::CliError;
