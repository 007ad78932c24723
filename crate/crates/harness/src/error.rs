use std::fmt;
use thiserror::Error;

/// Pipeline stage an error came from; printed as a tag in CLI diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Data,
    Train,
    Scenarios,
    Pricing,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Data => "data",
            Stage::Train => "train",
            Stage::Scenarios => "scenarios",
            Stage::Pricing => "pricing",
            Stage::Output => "output",
        })
    }
}

#[derive(Debug, Error)]
#[error("[{stage}] {msg}")]
pub struct HarnessError {
    pub stage: Stage,
    pub msg: String,
}

impl HarnessError {
    pub fn new(stage: Stage, err: impl fmt::Display) -> Self {
        Self {
            stage,
            msg: err.to_string(),
        }
    }
}
