use thiserror::Error;

/// Errors produced anywhere in the navigation stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error(
        "vehicle not static: specific force magnitude {magnitude:.3} m/s^2 outside [0.8 g, 1.2 g]"
    )]
    NotStatic { magnitude: f64 },

    #[error("numerical health fault at t = {time:.3} s: {reason}")]
    NumericalHealth { time: f64, reason: String },

    #[error("filter fault: {0}")]
    Fault(String),

    #[error("invalid mission: {0}")]
    InvalidMission(String),

    #[error("measurement rejected: {0}")]
    MeasurementRejected(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }
}
