//! Crate-wide error type.

use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Input rejected before any computation ran (shape, emptiness, NaN, range).
    InvalidInput(String),
    /// Dimension mismatch naming both sides.
    DimensionMismatch { expected: usize, got: usize },
    /// A statistic that must be nonzero (variance, spread) vanished.
    DegenerateVariance(String),
    /// A least-squares system was rank deficient or too ill conditioned to trust.
    DegenerateFit(String),
    /// A zero-variance feature column cannot be normalized.
    DegenerateFeature { index: usize },
    /// Positional context for errors raised inside a per-sample loop.
    At { index: usize, inner: Box<Error> },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn at(index: usize, inner: Error) -> Self {
        Error::At {
            index,
            inner: Box::new(inner),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::DegenerateVariance(msg) => write!(f, "degenerate variance: {msg}"),
            Error::DegenerateFit(msg) => write!(f, "degenerate fit: {msg}"),
            Error::DegenerateFeature { index } => {
                write!(f, "feature {index} has zero variance on the training set")
            }
            Error::At { index, inner } => write!(f, "at index {index}: {inner}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
