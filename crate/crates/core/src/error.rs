//! Error type shared across the crate.

use std::path::PathBuf;

/// Errors produced by schedulers, the environment, the curriculum loop and
/// the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A constructor or config field violated one of its bounds.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An arm index outside `[0, n_arms)` was passed to a scheduler or the
    /// environment.
    #[error("arm index {arm} out of range for {n_arms} arms")]
    InvalidArm { arm: usize, n_arms: usize },

    /// A numeric precondition was violated (non-finite input, non-positive
    /// loss, empty buffer, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Config file failed to parse; the underlying error carries line and
    /// column information.
    #[error("failed to parse {path}: {source}")]
    ConfigParse {
        path: PathBuf,
        #[source]
        source: Box<toml::de::Error>,
    },

    /// A persisted trajectory file did not match the expected schema.
    #[error("failed to parse {path} (line {line}): {message}")]
    TrajectoryParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Filesystem failure, with the offending path.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Exit code the CLI maps this error to: 1 for validation/domain
    /// problems, 2 for i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
