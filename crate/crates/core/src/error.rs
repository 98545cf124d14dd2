use thiserror::Error;

/// Errors raised by the library.
///
/// Input errors (bad parameters, mismatched spaces, oversized exact
/// problems) are distinguished from numeric failures so that drivers can
/// map them to different exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("space mismatch: {0}")]
    SpaceMismatch(String),
    #[error("exact solver limited to {limit} elements, got {size}")]
    Oversized { size: usize, limit: usize },
    #[error("non-invertible map: {0}")]
    NonInvertible(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    /// True for failures of the computation itself rather than of its inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonInvertible(_) | Error::Numeric(_))
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
