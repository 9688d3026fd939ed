use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the spectral computations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("spectral parameter must be non-real, got {0}")]
    RealSpectralParameter(Complex64),

    #[error("degenerate denominator in {what} (|denominator| = {magnitude:e})")]
    Degenerate { what: &'static str, magnitude: f64 },

    #[error("integration failed at x = {x}: {reason} (error estimate {error_estimate:e})")]
    Integration {
        x: f64,
        reason: &'static str,
        error_estimate: f64,
    },

    #[error("eigenvalue bracketing failed: {0}")]
    Bracket(String),

    #[error("oscillation count not consecutive: expected index {expected}, found {found}")]
    OscillationCount { expected: usize, found: usize },

    #[error("truncation error estimate {estimate:e} exceeds tolerance {tol:e}")]
    Truncation { estimate: f64, tol: f64 },

    #[error("domain too short: need [0, {requested}] but only [0, {available}] is available")]
    Domain { requested: f64, available: f64 },

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("values indistinguishable to machine precision beyond radius {last_resolved_radius}")]
    Indistinguishable { last_resolved_radius: f64 },

    #[error("failed to parse expression `{source_text}`: {message}")]
    Expression {
        source_text: String,
        message: String,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require_non_real(z: Complex64) -> Result<()> {
    if z.im == 0.0 || !z.im.is_finite() || !z.re.is_finite() {
        return Err(Error::RealSpectralParameter(z));
    }
    Ok(())
}
