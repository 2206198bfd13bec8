use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("field contains non-finite values ({context})")]
    NonFinite { context: String },

    #[error("shape mismatch: field lives on a different grid ({0})")]
    ShapeMismatch(String),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e}, tol {tol:.3e})")]
    SolverFailure {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
