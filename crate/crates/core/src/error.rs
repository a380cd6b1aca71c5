//! Error type shared across the engine.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid dimensions, options, or values supplied by the caller.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed IDX payload. The offset points at the first offending byte.
    #[error("idx parse error at byte {offset}: {message}")]
    Idx { offset: usize, message: String },

    /// Malformed feature CSV or config document; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Line { line: usize, message: String },

    /// A NaN or infinity reached an operation that requires finite input.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Episodic memory contract violation (frozen past, empty pool, ...).
    #[error("memory error: {0}")]
    Memory(String),

    /// Strategy state machine misuse (double freeze, missing rate vector, ...).
    #[error("strategy error: {0}")]
    Strategy(String),

    /// Metric queried before the run produced the required rows.
    #[error("metrics error: {0}")]
    Metrics(String),

    /// Failure inside the training loop, annotated with where it happened.
    #[error("task {task}, iteration {iteration}: {source}")]
    Run {
        task: usize,
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn idx(offset: usize, msg: impl Into<String>) -> Self {
        Error::Idx {
            offset,
            message: msg.into(),
        }
    }

    pub fn line(line: usize, msg: impl Into<String>) -> Self {
        Error::Line {
            line,
            message: msg.into(),
        }
    }
}
