//! Dense multi-dimensional `f64` arrays with reverse-mode automatic
//! differentiation, plus the training-side utilities built on top of them:
//! the Adam optimizer, a seeded RNG, a finite-difference gradient checker,
//! and a versioned binary checkpoint container.
//!
//! Everything is CPU-only, 64-bit, and deterministic: arrays are immutable
//! values once produced, all randomness flows through an explicitly seeded
//! [`rng::Prng`], and the gradient tape is single-threaded.

pub mod array;
pub mod checkpoint;
pub mod gradcheck;
pub mod optim;
pub mod rng;
pub mod tape;

mod kernels;

pub use array::Array;
pub use optim::Adam;
pub use rng::Prng;
pub use tape::{DropoutMode, NodeId, Tape};

use std::fmt;

/// Errors produced by array construction, tape operations, and checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two operands have incompatible shapes for the named operation.
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    /// A single operand's shape violates the operation's contract.
    InvalidShape {
        op: &'static str,
        shape: Vec<usize>,
        reason: String,
    },
    /// A configuration value (stride, axis, probability, ...) is out of range.
    Config(String),
    /// `backward` was called on a non-scalar root.
    NonScalarRoot { shape: Vec<usize> },
    /// A checkpoint file could not be read or written.
    Io(String),
    /// A checkpoint file is malformed or has the wrong magic/version.
    Corrupt(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, lhs, rhs } => {
                write!(f, "{op}: shape mismatch between {lhs:?} and {rhs:?}")
            }
            Error::InvalidShape { op, shape, reason } => {
                write!(f, "{op}: invalid shape {shape:?}: {reason}")
            }
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::NonScalarRoot { shape } => {
                write!(f, "backward requires a scalar root, got shape {shape:?}")
            }
            Error::Io(msg) => write!(f, "checkpoint i/o error: {msg}"),
            Error::Corrupt(msg) => write!(f, "corrupt checkpoint: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
