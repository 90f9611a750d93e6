use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: column `{column}` {problem}")]
    Schema { column: String, problem: String },

    #[error("validation error{}: {message}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    Validation { row: Option<usize>, message: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("degenerate target: {0}")]
    DegenerateTarget(String),

    #[error("dimension mismatch: expected {expected} columns, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("singular fit: {0}")]
    SingularFit(String),

    #[error("standard error undefined: {0}")]
    SeUndefined(String),

    #[error("upstream estimation step failed: {0}")]
    Upstream(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input in {}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn validation(message: impl Into<String>) -> Self {
        Error::Validation {
            row: None,
            message: message.into(),
        }
    }

    pub(crate) fn at_row(row: usize, message: impl Into<String>) -> Self {
        Error::Validation {
            row: Some(row),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 for validation failures, 2 for IO failures,
    /// 3 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema { .. }
            | Error::Validation { .. }
            | Error::EmptyInput(_)
            | Error::DimensionMismatch { .. }
            | Error::Config(_) => 1,
            Error::Io { .. } | Error::Parse { .. } => 2,
            _ => 3,
        }
    }
}
