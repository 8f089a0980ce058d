use num_complex::Complex64;
use thiserror::Error;

/// Failure modes shared by every stage of the pipeline.
#[derive(Debug, Clone, Error)]
pub enum TodaError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("argument {z} is a pole of the Gamma function")]
    GammaPole { z: Complex64 },

    #[error("{z} lies within {distance:e} of a zero of sinh")]
    SinhZero { z: Complex64, distance: f64 },

    #[error("invalid parameter `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("determinant truncation did not converge: depth {depth}, |value(M) - value(2M)| = {delta:e} > {tol:e}")]
    Truncation { depth: usize, delta: f64, tol: f64 },

    #[error("expected {expected} zeros of the Hill determinant in the strip, contour count gives {count:.6}")]
    ZeroCount { expected: usize, count: f64 },

    #[error("consistency check `{check}` failed: residual {residual:e} exceeds {tol:e}")]
    Consistency { check: String, residual: f64, tol: f64 },

    #[error("solver did not converge: {message}")]
    Solver { message: String },

    #[error("grid resolution insufficient: halving the spacing moved the solution by {delta:e} (allowed {allowed:e})")]
    Discretization { delta: f64, allowed: f64 },

    #[error("evaluation at a pole: residue magnitude {residue:e}")]
    Pole { residue: f64 },

    #[error("integration domain too small: tail contribution {tail:e} exceeds {tol:e}")]
    GridTooSmall { tail: f64, tol: f64 },
}

pub type Result<T> = std::result::Result<T, TodaError>;

pub(crate) fn validation(field: &str, message: impl Into<String>) -> TodaError {
    TodaError::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}
