use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid {ty}.{field}: {reason}")]
    Validation {
        ty: &'static str,
        field: &'static str,
        reason: String,
    },

    #[error("{path}: bad magic {found:?}, expected \"O3DF\"")]
    BadMagic { path: PathBuf, found: [u8; 4] },

    #[error("{path}: unsupported matrix version {version}")]
    UnsupportedVersion { path: PathBuf, version: u32 },

    #[error("{path}: truncated payload, expected {expected} values but found {found}")]
    Truncated {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("{path}: non-finite value at index {index}")]
    NonFinite { path: PathBuf, index: u64 },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("missing input {path} (produced by {producer})")]
    MissingInput {
        path: PathBuf,
        producer: &'static str,
    },

    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(ty: &'static str, field: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            ty,
            field,
            reason: reason.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingInput { .. } => 3,
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 3,
            Error::Validation { .. }
            | Error::BadMagic { .. }
            | Error::UnsupportedVersion { .. }
            | Error::Truncated { .. }
            | Error::NonFinite { .. }
            | Error::Format { .. }
            | Error::Json { .. }
            | Error::DimensionMismatch { .. }
            | Error::InvalidArgument(_) => 2,
            Error::Io { .. } => 1,
        }
    }
}
