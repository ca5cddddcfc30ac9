use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvpoError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("kalman gain undefined: p_a + p_b = 0")]
    UndefinedGain,
    #[error("explained variance undefined: p_b + r = 0")]
    UndefinedEv,
    #[error("layout generation failed: {0}")]
    Generation(String),
    #[error("invalid transition: {0}")]
    InvalidTransition(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("config line {line}, column {column}: {message}")]
    Config { line: usize, column: usize, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("training aborted at step {step}: {source}")]
    Training {
        step: usize,
        #[source]
        source: Box<EvpoError>,
    },
}

pub type Result<T> = std::result::Result<T, EvpoError>;

pub(crate) fn io_error(path: &std::path::Path, err: std::io::Error) -> EvpoError {
    EvpoError::Io { path: path.display().to_string(), message: err.to_string() }
}

pub(crate) fn invalid(msg: impl Into<String>) -> EvpoError {
    EvpoError::InvalidInput(msg.into())
}
