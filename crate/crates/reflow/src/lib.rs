//! Experiment runner, artifact formats and CLI plumbing for `reflow-core`.

pub mod config;
pub mod error;
pub mod output;
pub mod parallel;
pub mod presets;
pub mod runner;

pub use config::ExperimentConfig;
pub use error::RunError;
pub use output::Manifest;
pub use runner::{run_experiment, RunOptions};
