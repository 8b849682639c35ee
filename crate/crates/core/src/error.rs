use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("lag {lag} out of range for sequence length {n_len}")]
    InvalidLag { lag: usize, n_len: usize },

    #[error("lag {0} is not in the lag set")]
    LagNotInSet(usize),

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("theory check failed: {0}")]
    TheoryCheck(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

/// Process exit codes of the command-line tool.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const VALIDATION: i32 = 1;
    pub const DIVERGENCE: i32 = 2;
    pub const IO: i32 = 3;
    pub const VERIFY_FAILURE: i32 = 4;
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Csv(_) => exit::IO,
            Error::TheoryCheck(_) => exit::DIVERGENCE,
            _ => exit::VALIDATION,
        }
    }
}
