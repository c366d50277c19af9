//! Experiment engine and command-line front end for `robust-dist`.
//!
//! An [`config::ExperimentConfig`] describes one grid of Monte Carlo runs;
//! [`engine::run_experiment`] turns it into a [`report::RiskReport`] whose
//! rows carry the measured risk next to the rate bounds at the same
//! parameters. Reports depend only on the config, never on the number of
//! worker threads.

pub mod analytic;
pub mod calibrate;
pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod report;

pub use config::ExperimentConfig;
pub use engine::{run_experiment, sweep, RunOptions};
pub use error::{ConfigError, HarnessError, Result};
pub use report::{RiskReport, RiskRow};
