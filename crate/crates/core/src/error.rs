use std::fmt;

use thiserror::Error;

/// Which side of zero the two asymptotic limits of `s(μA+Q)` sit on when no
/// threshold exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoThresholdCase {
    /// `max q_i ≤ 0`: the bound is non-positive for every μ (extinction side).
    ExtinctionAllMu,
    /// The large-μ limit is `≥ 0`: the bound is non-negative for every μ
    /// (persistence side).
    PersistenceAllMu,
}

impl fmt::Display for NoThresholdCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoThresholdCase::ExtinctionAllMu => f.write_str("max_i q_i <= 0, s(muA+Q) <= 0 for all mu"),
            NoThresholdCase::PersistenceAllMu => f.write_str("large-mu limit >= 0, s(muA+Q) >= 0 for all mu"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed input: wrong shape, negative rates, non-finite entries.
    #[error("validation error: {0}")]
    Validation(String),

    /// Input violates a structural hypothesis (reducible where irreducible is
    /// required, disconnected digraph, ...).
    #[error("structure error: {0}")]
    Structure(String),

    /// A parameter lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative method did not reach its tolerance.
    #[error("numeric error: {message} (last residual {residual:e})")]
    Numeric { message: String, residual: f64 },

    /// Exhaustive enumeration refused above the configured size guard.
    #[error("capacity error: n = {n} exceeds enumeration guard {guard}")]
    Capacity { n: usize, guard: usize },

    /// The spectral bound does not change sign on `(0, ∞)`.
    #[error("no threshold: {0}")]
    NoThreshold(NoThresholdCase),

    /// A boundary case (`m = 0` or `M = 0`) on which the stability theory is
    /// silent.
    #[error("degenerate, theorem silent: {0}")]
    Degenerate(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn structure(msg: impl Into<String>) -> Self {
        Error::Structure(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>, residual: f64) -> Self {
        Error::Numeric { message: msg.into(), residual }
    }

    /// Attach context (for instance the offending μ) to the message.
    pub fn context(self, ctx: impl fmt::Display) -> Self {
        match self {
            Error::Validation(m) => Error::Validation(format!("{ctx}: {m}")),
            Error::Structure(m) => Error::Structure(format!("{ctx}: {m}")),
            Error::Domain(m) => Error::Domain(format!("{ctx}: {m}")),
            Error::Numeric { message, residual } => Error::Numeric { message: format!("{ctx}: {message}"), residual },
            Error::Degenerate(m) => Error::Degenerate(format!("{ctx}: {m}")),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
