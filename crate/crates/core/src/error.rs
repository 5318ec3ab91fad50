//! Crate-wide error taxonomy.
//!
//! Every fallible operation reports one of three failure classes:
//! [`Error::Domain`] for violated preconditions, [`Error::Precision`] when a
//! requested tolerance cannot be met (carrying the bound that *is*
//! achievable), and [`Error::Integrity`] when an internal invariant fails —
//! the last signals corrupted input or a bug, never a recoverable condition.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates the operation's stated precondition.
    #[error("domain: {0}")]
    Domain(String),

    /// The requested tolerance is unreachable; `bound` is the tightest
    /// guarantee the operation can certify with the given parameters.
    #[error("precision: {message} (achievable bound {bound:.3e})")]
    Precision { message: String, bound: f64 },

    /// An internal invariant failed (e.g. a lattice that must be saturated
    /// is not, or a Gram matrix lost positive definiteness).
    #[error("integrity: {0}")]
    Integrity(String),
}

impl Error {
    pub fn domain(message: impl Into<String>) -> Self {
        Error::Domain(message.into())
    }

    pub fn precision(message: impl Into<String>, bound: f64) -> Self {
        Error::Precision {
            message: message.into(),
            bound,
        }
    }

    pub fn integrity(message: impl Into<String>) -> Self {
        Error::Integrity(message.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
