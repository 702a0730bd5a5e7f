use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("value iteration did not converge at alpha = {alpha} after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        alpha: f64,
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error("solve failed at alpha = {alpha}: {source}")]
    ScheduleSolve {
        alpha: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("certification failed: {0}")]
    Certification(String),

    #[error("ACOI certificate is not valid (min residual {min_residual:e} < -{tol:e})")]
    CertificateInvalid { min_residual: f64, tol: f64 },

    #[error("insufficient sequence: {0}")]
    InsufficientSequence(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid resolution error: {0}")]
    Resolution(String),

    #[error("model specification violates {0}")]
    Spec(String),

    #[error("policy error at step {step}: {reason}")]
    Policy { step: usize, reason: String },

    #[error("{censored} of {total} paths exceeded the cap of {cap} steps")]
    Censoring {
        censored: usize,
        total: usize,
        cap: usize,
    },

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
