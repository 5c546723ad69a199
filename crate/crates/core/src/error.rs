use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {source_name}: {message}")]
    Parse { source_name: String, message: String },

    #[error("validation error at {record}: {message}")]
    Validation { record: String, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate district {district}: {reason}")]
    DegenerateDistrict { district: String, reason: String },

    #[error("invalid solver configuration: {0}")]
    Config(String),

    #[error("archive schema version {found} is newer than supported major version {supported}")]
    SchemaVersion { found: String, supported: u32 },

    #[error("need at least {needed} clusters, found {found}")]
    TooFewClusters { needed: usize, found: usize },

    #[error("separation detected: coefficient `{column}` diverged to {value:.3}")]
    SeparationDetected { column: String, value: f64 },

    #[error("design matrix is rank deficient (rank {rank} < {columns} columns)")]
    RankDeficient { rank: usize, columns: usize },

    #[error("{what} did not converge after {iterations} iterations")]
    NotConverged { what: &'static str, iterations: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(source_name: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn validation(record: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            record: record.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
