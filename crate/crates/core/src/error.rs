use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or arguments, detected before any work.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("html parse error at byte {offset}: {message}")]
    HtmlParse { offset: usize, message: String },

    #[error("schema error: missing column `{column}`")]
    MissingColumn { column: String },

    #[error("row {row}: unknown label `{label}` (expected Negative, Neutral or Positive)")]
    UnknownLabel { row: usize, label: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    /// Malformed file. `offset` is a byte offset for binary formats and a
    /// 1-based line number for line-oriented ones.
    #[error("format error in {path} at offset {offset}: {message}")]
    Format {
        path: String,
        offset: u64,
        message: String,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<String>, offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            offset,
            message: message.into(),
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// Process exit code: 2 config/validation, 3 data format, 4 numerical, 5 transport.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io { .. } => 2,
            Error::HtmlParse { .. }
            | Error::MissingColumn { .. }
            | Error::UnknownLabel { .. }
            | Error::EmptyInput(_)
            | Error::Format { .. }
            | Error::Input(_)
            | Error::DimensionMismatch { .. } => 3,
            Error::Numerical(_) => 4,
            Error::Transport { .. } => 5,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }

    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Transport { .. })
    }
}
