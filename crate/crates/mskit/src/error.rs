//! Error type shared by every module of the crate.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building or checking transforms.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A staircase was not weakly decreasing, or had length zero.
    #[error("invalid staircase {0:?}: entries must be weakly decreasing and non-empty")]
    InvalidStaircase(Vec<i64>),

    /// Two objects that must share a length or dimension did not.
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    /// An index was outside its valid range.
    #[error("index {index} out of range (size {size})")]
    IndexOutOfRange { index: usize, size: usize },

    /// A requested object would exceed the configured dimension cap.
    #[error("dimension {dim} exceeds the configured cap {cap}")]
    CapExceeded { dim: u128, cap: usize },

    /// A Bratteli path or encoded bit string did not describe a valid path.
    #[error("invalid path: {0}")]
    InvalidPath(String),

    /// A walled Brauer diagram violated the wall constraints or was malformed.
    #[error("invalid walled Brauer diagram: {0}")]
    InvalidDiagram(String),

    /// A textual or file encoding could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// Matrix or register shapes did not fit together.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A Hamiltonian could not be made Hermitian unambiguously.
    #[error("non-Hermitian Hamiltonian: {0}")]
    NotHermitian(String),

    /// A constructed map failed its unitarity self-check.
    #[error("unitarity check failed for {what}: residual {residual:e}")]
    NotUnitary { what: String, residual: f64 },

    /// Any other violated precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),
}
