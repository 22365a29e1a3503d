//! Command implementations behind the `spinfilter` binary: configuration
//! loading, single runs, ensembles, the headless invariant suite and the
//! figure reproductions, all writing plain CSV and text reports.

pub mod check;
pub mod commands;
pub mod output;

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error("{0}")]
    Divergence(String),

    #[error("{0}")]
    PropertyFailure(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 0 success, 1 validation (and I/O), 2 divergence, 3 property failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) | CliError::Io { .. } => 1,
            CliError::Divergence(_) => 2,
            CliError::PropertyFailure(_) => 3,
        }
    }
}

impl From<spinfilter::Error> for CliError {
    fn from(e: spinfilter::Error) -> Self {
        match e {
            spinfilter::Error::Diverged { .. } | spinfilter::Error::EnsembleDiverged { .. } => {
                CliError::Divergence(e.to_string())
            }
            other => CliError::Validation(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
