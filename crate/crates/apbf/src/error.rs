//! Error types shared across the crate.

use thiserror::Error;

/// Errors from filter construction, parameter search, and analysis.
#[derive(Debug, Error)]
pub enum FilterError {
    /// A parameter violates an operation's preconditions.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// No (k, l) configuration satisfies the requested constraints.
    #[error("no configuration satisfies the constraints: {0}")]
    NoConfiguration(String),
    /// The request exceeds a hard resource bound (e.g. oracle state space).
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
}

/// Errors from decoding a snapshot byte stream.
///
/// Variants are distinct so callers can tell malformed input apart from
/// version skew and simple truncation.
#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported snapshot version {0}")]
    BadVersion(u8),
    #[error("truncated snapshot: need {needed} bytes, got {got}")]
    Truncated { needed: usize, got: usize },
    #[error("snapshot violates a filter invariant: {0}")]
    Invariant(String),
}
