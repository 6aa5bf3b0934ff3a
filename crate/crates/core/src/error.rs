use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// A row that failed validation while reading tabular input.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    /// 1-based line number in the source, header included.
    pub line: u64,
    pub message: String,
}

impl std::fmt::Display for RowError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("target {target} eV outside achievable range [{min}, {max}] eV")]
    OutOfRange { target: f64, min: f64, max: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("detuning must be nonzero")]
    SingularDetuning,

    #[error("sign convention violated: {0}")]
    Convention(String),

    #[error("correlation undefined: co and cross rates are both zero")]
    UndefinedCorrelation,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-physical state: {0}")]
    NonPhysical(String),

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("missing measurement settings: {}", .0.join(", "))]
    MissingSettings(Vec<String>),

    #[error("{} invalid row(s): {}", .0.len(), .0.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidRows(Vec<RowError>),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
