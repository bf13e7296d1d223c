use thiserror::Error;

/// Errors raised by the library. Numeric failures and input validation
/// failures are kept apart so front ends can map them to distinct exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported curve form: {0}")]
    UnsupportedForm(String),
    #[error("curve is singular (discriminant is zero)")]
    SingularCurve,
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("series did not converge within {max_terms} terms")]
    NonConvergence { max_terms: usize },
    #[error("could not bracket tau for j = {j}")]
    BracketFailure { j: f64 },
    #[error("no point on the real locus has x = {x}")]
    NoRoot { x: f64 },
    #[error("exact arithmetic exceeded the digit budget of {budget} digits")]
    PrecisionOverflow { budget: usize },
    #[error("box too large: side {side} exceeds guard {guard}")]
    BoxTooLarge { side: String, guard: u64 },
    #[error("bad reduction at p = {p}")]
    BadReduction { p: u64 },
    #[error("degenerate sieve: {0}")]
    DegenerateSieve(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::BracketFailure { .. }
                | Error::NoRoot { .. }
                | Error::PrecisionOverflow { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
