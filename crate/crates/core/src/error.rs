use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the localization pipeline and its I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Reading or writing a file failed.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Input bytes do not form a valid image, sequence, or stream.
    #[error("format error: {0}")]
    Format(String),

    /// An operation was called outside its domain (bad dimensions,
    /// out-of-range parameter, degenerate input).
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid configuration (unknown key, value out of range).
    #[error("config error: {0}")]
    Config(String),

    /// A pipeline stage failed; wraps the underlying error with the
    /// stage name.
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn in_stage(stage: &'static str, source: Error) -> Self {
        Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    /// The error underneath any stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
