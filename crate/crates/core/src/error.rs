use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate channel: at least one propagation path is required")]
    DegenerateChannel,

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("no scheduled users")]
    NoScheduledUsers,

    #[error("ZF infeasible: effective channel is rank deficient (singular value ratio {ratio:e})")]
    ZfInfeasible { ratio: f64 },

    #[error("numerical failure at iteration {iteration}: non-finite gradient")]
    NumericalFailure { iteration: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("realization {realization}: {source}")]
    Realization {
        realization: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("empirical CDF needs at least one record")]
    EmptyRecords,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
