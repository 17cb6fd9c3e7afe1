use std::path::PathBuf;

use cem_core::CemError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Run(#[from] CemError),

    #[error("failed to encode output: {0}")]
    Encode(String),

    #[error("{failed} of {total} replicates failed; first failure: replicate {first_replicate}: {first_error}")]
    Replicates {
        failed: usize,
        total: usize,
        first_replicate: u32,
        first_error: CemError,
    },
}

impl HarnessError {
    /// Process exit status: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn config_from(err: CemError) -> Self {
        HarnessError::Config(err.to_string())
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
