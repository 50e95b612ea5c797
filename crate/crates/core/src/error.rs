use thiserror::Error;

/// Errors raised by the pricing, calibration and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The imaginary part of a cumulant argument (or a real exponent) left the
    /// admissible strip. `bound` is the violated edge.
    #[error("strip violation: value {value} outside ({lo}, {hi}); offending bound {bound}")]
    StripViolation {
        value: f64,
        lo: f64,
        hi: f64,
        bound: f64,
    },

    #[error("operation not supported for the {0} model")]
    UnsupportedVariant(&'static str),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("invalid parameters: {0}")]
    ParameterError(String),

    /// Adaptive quadrature did not reach tolerance. The best estimate is kept.
    #[error("quadrature failed ({reason}); best estimate {estimate} with error {abs_err}")]
    QuadratureFailure {
        estimate: f64,
        abs_err: f64,
        reason: String,
    },

    #[error("implied volatility inversion failed: {0}")]
    InversionFailure(String),

    #[error("consistency check failed: {0}")]
    ConsistencyFailure(String),

    #[error("moment E[exp({exponent} X)] diverges for this model")]
    MomentDivergence { exponent: f64 },

    #[error("no root in bracket [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoRootInBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("optimisation failed: {0}")]
    OptimizationFailure(String),

    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },

    #[error("insufficient data: {found} rows, need at least {required}")]
    InsufficientData { found: usize, required: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
