//! Error type shared by every module in the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Two operands whose shapes must agree do not.
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// A single tensor has a shape the operation cannot accept.
    #[error("invalid shape for {op}: {detail} (got {shape:?})")]
    InvalidShape {
        op: &'static str,
        detail: String,
        shape: Vec<usize>,
    },

    /// Every logit in a softmax row carries the mask sentinel, so the row
    /// has no admissible key. Signals an over-restrictive mask.
    #[error("fully masked row {row}")]
    FullyMaskedRow { row: usize },

    /// An `AttentionConfig` violates one of its invariants.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A scalar argument is out of range (zero window, zero heads, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
