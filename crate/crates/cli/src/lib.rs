//! Batch runner behind the `simulate` binary.

pub mod config;
pub mod error;
pub mod runner;

pub use config::{Check, RunConfig, Scenario};
pub use error::CliError;
pub use runner::{describe, run, Outcome, RunSummary};
