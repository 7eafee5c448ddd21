use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while loading packs, training models or touching storage.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("content pack `{pack}` could not be loaded from {path}: {reason}")]
    Pack {
        pack: String,
        path: PathBuf,
        reason: String,
    },

    #[error("{file}:{line}: {reason}")]
    Parse {
        file: String,
        line: usize,
        reason: String,
    },

    #[error("flow `{flow}` is invalid: {reason}")]
    InvalidFlow { flow: String, reason: String },

    #[error("training error: {0}")]
    Training(String),

    #[error("model file error: {0}")]
    Model(String),

    #[error("storage unavailable (retryable): {0}")]
    Storage(String),

    #[error("corrupt state record for conversation `{id}`: {reason}")]
    Decode { id: String, reason: String },

    #[error("unknown SSML parameter `{0}`")]
    UnknownSsmlParam(String),

    #[error("empty response pool")]
    EmptyPool,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(file: impl Into<String>, line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            reason: reason.into(),
        }
    }

    pub fn pack(pack: impl Into<String>, path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::Pack {
            pack: pack.into(),
            path: path.into(),
            reason: reason.to_string(),
        }
    }

    /// Storage failures are the only retryable class.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Storage(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
