use std::fmt;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Engine error. Every variant maps onto exactly one [`ErrorCode`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("{entity} {id} not found")]
    NotFound { entity: &'static str, id: u64 },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("could not decode image: {0}")]
    Decode(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("storage error: {0}")]
    Storage(String),
    #[error("store at {path} is corrupt: {reason}")]
    CorruptStore { path: String, reason: String },
    #[error("store at {0} is already open for writing by another handle")]
    StoreLocked(String),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    pub fn not_found(entity: &'static str, id: u64) -> Self {
        Error::NotFound { entity, id }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn code(&self) -> ErrorCode {
        match self {
            Error::NotFound { .. } => ErrorCode::NotFound,
            Error::Validation(_) => ErrorCode::Validation,
            Error::Decode(_) => ErrorCode::Decode,
            Error::InsufficientData(_) => ErrorCode::InsufficientData,
            Error::Storage(_) | Error::CorruptStore { .. } | Error::StoreLocked(_) | Error::Io(_) => {
                ErrorCode::Storage
            }
        }
    }
}

/// Closed set of error codes shared by the service and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    NotFound,
    Validation,
    Decode,
    InsufficientData,
    Storage,
    Internal,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::NotFound => "NOT_FOUND",
            ErrorCode::Validation => "VALIDATION",
            ErrorCode::Decode => "DECODE",
            ErrorCode::InsufficientData => "INSUFFICIENT_DATA",
            ErrorCode::Storage => "STORAGE",
            ErrorCode::Internal => "INTERNAL",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
