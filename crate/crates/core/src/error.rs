use thiserror::Error;

use crate::env::Model;

/// Errors raised by simulation, coupling and estimation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("window mismatch: {left} sites vs {right} sites")]
    WindowMismatch { left: usize, right: usize },

    #[error("model mismatch: expected {expected:?}, found {found:?}")]
    ModelMismatch { expected: Model, found: Model },

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The hypothesis of a conditional coupling guarantee does not hold for the inputs.
    #[error("coupling hypothesis violated: {0}")]
    Hypothesis(String),

    /// A walk came within reach of the periodic seam of a finite window.
    #[error("seam breach at time {time}: position {position} with half-width {half_width}")]
    SeamBreach { time: u64, position: i64, half_width: usize },

    /// Two clock arrivals landed on the same floating-point instant.
    #[error("simultaneous clock arrivals at t = {time}")]
    ClockTie { time: f64 },

    /// A run stopped before finishing because its sampling budget ran out.
    #[error("budget exhausted: {0}")]
    Budget(String),

    #[error("configuration error (line {line}): {message}")]
    Config { line: usize, message: String },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
