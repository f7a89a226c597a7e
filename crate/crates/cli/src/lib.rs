//! Batch runner for the tci-lab experiments: JSON configuration in, CSV
//! reports and a JSON provenance sidecar out.

pub mod config;
pub mod error;
pub mod experiments;
pub mod report;
pub mod runner;

pub use config::ExperimentConfig;
pub use error::RunError;
pub use report::Outcome;
pub use runner::{execute, run, RunSummary, VERSION};
