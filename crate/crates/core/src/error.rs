use thiserror::Error;

/// Errors produced by the ellipse testing toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter sequence failed validation at a specific index.
    #[error("invalid ellipse parameters at index {index}: {reason}")]
    InvalidSequence { index: usize, reason: String },

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: String,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range [{lo}, {hi}]")]
    IndexOutOfRange { index: usize, lo: usize, hi: usize },

    /// The fixed-point inequality has no sign change inside the search bracket.
    #[error(
        "bracket failure on [{lo:e}, {hi:e}]: residuals {residual_lo:e} / {residual_hi:e} do not straddle zero"
    )]
    Bracket {
        lo: f64,
        hi: f64,
        residual_lo: f64,
        residual_hi: f64,
    },

    /// Corollary-level applicability condition `t_u <= sqrt(mu_s)` failed.
    #[error("corollary precondition violated: t_u = {t_u:e} exceeds sqrt(mu_s) = {sqrt_mu_s:e}")]
    CorollaryPrecondition { t_u: f64, sqrt_mu_s: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("not implemented: {0}")]
    Unsupported(String),

    #[error("combinatorial guard: {subsets} coordinate subsets exceeds limit {limit}")]
    TooManySubsets { subsets: f64, limit: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, value: f64, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        value,
        reason: reason.into(),
    }
}
