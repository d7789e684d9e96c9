use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: boundary is {expected}D, point is {found}D")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("gradient is undefined at {0}")]
    SingularGradient(String),

    #[error("rigid motions are only defined for planar boundaries")]
    UnsupportedMotion,

    #[error("invalid scenario: {0}")]
    InvalidSpec(String),

    #[error("scenario `{name}` expects {expected}, got {found} start point(s)")]
    WrongForm {
        name: String,
        expected: &'static str,
        found: usize,
    },

    #[error("{what} supports at most {limit} boundaries, instance has {size}")]
    SizeGuard {
        what: &'static str,
        limit: usize,
        size: usize,
    },

    #[error("solver did not converge: {reason} (best length {best_length:.9}, residual {best_residual:.3e})")]
    NonConvergence {
        reason: String,
        best_length: f64,
        best_residual: f64,
    },

    #[error("model invariant violated: {0}")]
    ModelInvariant(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
