//! Desk-scale experiment harness and command-line front end for the
//! `twf-core` solvers.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod output;
pub mod seeds;

use twf_core::TwfError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] TwfError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Invalid(String),
}

impl HarnessError {
    /// Errors caused by the caller's arguments rather than by the run itself.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            HarnessError::Config(_) | HarnessError::Invalid(_) | HarnessError::Core(TwfError::InvalidArgument(_))
        )
    }
}
