//! Experiment harness: configuration, the end-to-end pricing pipeline,
//! parameter sweeps and CSV/JSON reporting.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod sweeps;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Stage};
