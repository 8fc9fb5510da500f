//! Error type shared by all core modules.

use alloc::string::String;
use core::fmt;

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by core operations.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A spec or config violates one of its invariants.
    InvalidConfig(String),
    /// An operation needs at least two trajectories in the buffer.
    BufferTooSmall { len: usize, needed: usize },
    /// A probability argument fell outside [0, 1].
    ProbabilityOutOfRange(f64),
    /// A required collaborator (encoder, ensemble) was not supplied.
    MissingDependency(&'static str),
    /// Two aligned sequences had different lengths.
    LengthMismatch { left: usize, right: usize },
    /// An operation received an empty batch or score list.
    EmptyInput(&'static str),
    /// Vector dimensions did not match the expected layout.
    DimensionMismatch { expected: usize, got: usize },
    /// Training produced a non-finite loss.
    NonFiniteLoss { member: usize, epoch: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::BufferTooSmall { len, needed } => {
                write!(f, "buffer holds {len} trajectories, need at least {needed}")
            }
            Error::ProbabilityOutOfRange(p) => {
                write!(f, "probability {p} outside [0, 1]")
            }
            Error::MissingDependency(what) => write!(f, "missing dependency: {what}"),
            Error::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::NonFiniteLoss { member, epoch } => {
                write!(f, "non-finite loss in ensemble member {member} at epoch {epoch}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
