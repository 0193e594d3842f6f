use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A record in a line-delimited input could not be decoded or violates the format.
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    /// Landmark count does not match the declared scheme.
    #[error("line {line}: scheme {scheme} expects {expected} landmarks, found {found}")]
    SchemeMismatch {
        line: usize,
        scheme: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: timestamp {timestamp_ms} ms does not increase (previous {previous_ms} ms)")]
    NonMonotonicTimestamp {
        line: usize,
        timestamp_ms: f64,
        previous_ms: f64,
    },

    #[error("duplicate event {stimulus}{turn}")]
    DuplicateEvent { stimulus: String, turn: u8 },

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid configuration value (window sizes, index maps, profiles).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// One or more input files could not be read or parsed.
    #[error("unreadable input:\n{}", .0.iter().map(|(p, e)| format!("  {}: {e}", p.display())).collect::<Vec<_>>().join("\n"))]
    Inputs(Vec<(PathBuf, String)>),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by the caller's inputs rather than by the engine.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Internal(_))
    }
}
