use thiserror::Error;

/// Errors raised by construction, coding, design and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An input vector has the wrong length.
    #[error("length mismatch: expected {expected}, got {actual}")]
    Length { expected: usize, actual: usize },

    /// A length that must be a power of two is not.
    #[error("{0} is not a power of two")]
    NotPowerOfTwo(usize),

    /// The requested HARQ design has no feasible scheme.
    #[error("infeasible design: {0}")]
    Infeasible(String),

    #[error("serialization: {0}")]
    Serde(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
