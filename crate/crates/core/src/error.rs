use thiserror::Error;

/// Errors surfaced by the library. The CLI maps these onto distinct exit
/// codes, so keep the variants coarse: configuration, IO, and numerical
/// guards are the categories callers dispatch on.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// The dual function is defined as +infinity outside the polar cone;
    /// evaluating it there is a caller bug or a drifted price vector.
    #[error("dual objective is infinite: price lies outside the polar cone (residual {residual:.3e})")]
    InfiniteDual { residual: f64 },

    /// Numerical guard: after projection the price must sit in the polar
    /// cone up to tolerance. Tripping this means the projection is broken.
    #[error("price drifted out of the polar cone (residual {residual:.3e} at step {t})")]
    PolarDrift { t: usize, residual: f64 },

    #[error("enumeration too large: {size:.3e} candidate sequences exceed limit {limit:.3e}")]
    EnumerationLimit { size: f64, limit: f64 },

    #[error("no decision sequence satisfies the goal constraint")]
    Infeasible,

    #[error("oracle requires exact enumeration over {got} items, limit is {limit}")]
    ExactModeLimit { got: usize, limit: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code the CLI should report for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Dimension { .. } | Error::ExactModeLimit { .. } => 2,
            Error::Io(_) | Error::Json(_) | Error::Format(_) => 3,
            Error::InfiniteDual { .. }
            | Error::PolarDrift { .. }
            | Error::EnumerationLimit { .. }
            | Error::Infeasible => 4,
        }
    }
}
