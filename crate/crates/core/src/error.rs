//! Crate-wide error type.

use thiserror::Error;

/// Errors reported by the numeric kernels and parameter validators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The modulus passed to a context constructor is not prime.
    #[error("{0} is not a prime")]
    NotPrime(u64),

    /// Vector dimension must be at least 1.
    #[error("dimension must be at least 1")]
    ZeroDimension,

    /// Two values from different contexts were combined.
    #[error("operands belong to different p-adic contexts")]
    ContextMismatch,

    /// An addition cancelled every digit inside the shared precision
    /// window; the result is zero to working precision and its valuation
    /// is unknown.
    #[error("full cancellation: result is zero to working precision")]
    PrecisionExhausted,

    /// The zero vector has no shell index or norm direction.
    #[error("the zero vector has no shell index")]
    ZeroVector,

    /// A measure or closed-form value exceeded the representable f64 range.
    #[error("value overflows the f64 range ({context})")]
    Overflow { context: &'static str },

    /// A series was recognized as divergent from its term ratio.
    #[error("divergent series: {reason}")]
    DivergentSeries { reason: String },

    /// A truncated summation hit the term cap before its certified tail
    /// bound fell under the requested tolerance.
    #[error("series truncation exceeded the cap of {max_terms} terms")]
    TruncationCap { max_terms: usize },

    /// The supremum scan ended on an increasing boundary that no closed
    /// form covers.
    #[error("supremum scan inconclusive at shell bound {k0}; widen the scan range")]
    InconclusiveSup { k0: i64 },

    /// Two pieces of a radial-function definition claim the same shell.
    #[error("shell {k} is covered twice by the function definition")]
    OverlappingPieces { k: i64 },

    /// A parameter fell outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Slot exponents do not balance against the declared aggregates.
    #[error("parameter balance violated: {0}")]
    BalanceViolation(String),

    /// Sharpness routines require the split of aggregate exponents used by
    /// the extremal construction.
    #[error("sharpness requires the converse exponent split: {0}")]
    SplitViolation(String),

    /// Monte-Carlo estimation needs a separable power-law weight with an
    /// analytically convergent constant.
    #[error("Monte-Carlo check unavailable: {0}")]
    McUnavailable(String),
}

pub type Result<T> = std::result::Result<T, Error>;
