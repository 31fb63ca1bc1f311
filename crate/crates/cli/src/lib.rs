//! Experiment runner for the `wrelax` heat benchmark: configuration, CSV
//! output and SVG plots.

pub mod config;
pub mod experiment;
pub mod plot;

pub use config::ExperimentConfig;
pub use experiment::{run_experiment, ExperimentOutcome};
