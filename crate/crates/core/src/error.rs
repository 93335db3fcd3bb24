use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library reports. [`Error::code`] gives the stable
/// machine-readable name used in CLI error JSON.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid linear system: {0}")]
    InvalidSystem(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("exhaustive complexity search covers at most {bound} other forms, system has {others}")]
    SystemTooLarge { others: usize, bound: usize },

    #[error("integer overflow: {0}")]
    Overflow(String),

    #[error("p = {p}: p^{d} exceeds the enumeration budget and inclusion-exclusion over {t} forms is unavailable")]
    BudgetExceeded { p: u64, d: usize, t: usize },

    #[error("cutoff z = {z} is too small, the tail bound needs z >= {required}")]
    CutoffTooSmall { z: u64, required: u64 },

    #[error("system has infinite complexity; the singular series tail is uncontrolled")]
    InfiniteComplexity,

    #[error("N = {0} is even; the local factor at p = 2 vanishes")]
    EvenN(u64),

    #[error("invalid Buchstab step h = {0}: need 0 < h <= 1e-3 with 1/h an integer")]
    InvalidStep(f64),

    #[error("u = {u} outside [{lo}, {hi}]")]
    OutOfRange { u: f64, lo: f64, hi: f64 },

    #[error("no sign change of e^gamma*omega(u) - 1 on [{u_min}, {u_max}] at table resolution")]
    RangeTooShort { u_min: f64, u_max: f64 },

    #[error("range width {width} exceeds the per-sieve maximum {max}")]
    RangeTooWide { width: u128, max: u64 },

    #[error("base primes up to {base_limit} cannot sieve values below {hi}")]
    BasePrimesInsufficient { hi: u64, base_limit: u64 },

    #[error("admissible set is empty mod {prime}")]
    DegenerateProfile { prime: u64 },

    #[error("u = {u} is outside the Buchstab table range [1, {u_max}]")]
    UOutOfTable { u: f64, u_max: f64 },

    #[error("range error: {0}")]
    RangeError(String),

    #[error("experiment infeasible: {0}")]
    ConfigInfeasible(String),

    #[error("short box side {side} exceeds the row box side U = {big_u}")]
    LambdaTooLarge { side: u64, big_u: u64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidSystem(_) => "INVALID_SYSTEM",
            Error::Parse { .. } => "PARSE_ERROR",
            Error::SystemTooLarge { .. } => "SYSTEM_TOO_LARGE",
            Error::Overflow(_) => "OVERFLOW",
            Error::BudgetExceeded { .. } => "BUDGET_EXCEEDED",
            Error::CutoffTooSmall { .. } => "CUTOFF_TOO_SMALL",
            Error::InfiniteComplexity => "INFINITE_COMPLEXITY",
            Error::EvenN(_) => "EVEN_N",
            Error::InvalidStep(_) => "INVALID_STEP",
            Error::OutOfRange { .. } => "OUT_OF_RANGE",
            Error::RangeTooShort { .. } => "RANGE_TOO_SHORT",
            Error::RangeTooWide { .. } => "RANGE_TOO_WIDE",
            Error::BasePrimesInsufficient { .. } => "BASE_PRIMES_INSUFFICIENT",
            Error::DegenerateProfile { .. } => "DEGENERATE_PROFILE",
            Error::UOutOfTable { .. } => "U_OUT_OF_TABLE",
            Error::RangeError(_) => "RANGE_ERROR",
            Error::ConfigInfeasible(_) => "CONFIG_INFEASIBLE",
            Error::LambdaTooLarge { .. } => "LAMBDA_TOO_LARGE",
            Error::InvalidArgument(_) => "INVALID_ARGUMENT",
        }
    }
}
