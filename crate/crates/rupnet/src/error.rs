use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: decode error at byte {offset}: {reason}", path.display())]
    Decode {
        path: PathBuf,
        offset: u64,
        reason: String,
    },

    #[error("corrupt checkpoint at byte {offset}: {reason}")]
    CorruptCheckpoint { offset: u64, reason: String },

    #[error("unpaired sample `{stem}`: {reason}")]
    Pairing { stem: String, reason: String },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("non-finite value in {context}")]
    NonFinite { context: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 usage/config, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) => 1,
            Error::InvalidShape(_)
            | Error::ShapeMismatch(_)
            | Error::Io { .. }
            | Error::Decode { .. }
            | Error::CorruptCheckpoint { .. }
            | Error::Pairing { .. }
            | Error::EmptyDataset(_) => 2,
            Error::NonFinite { .. } => 3,
        }
    }
}
