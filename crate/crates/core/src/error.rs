use thiserror::Error;

/// Errors raised by the simulator and the economics evaluator.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent input parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called outside its contract.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    /// Whether the error stems from invalid inputs rather than a failure
    /// while executing a valid request.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Usage(_) | Error::Json(_) | Error::Io { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
