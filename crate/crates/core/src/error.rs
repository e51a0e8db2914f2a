use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{context}: closed loop is not stable (spectral radius {radius})")]
    Unstable { context: String, radius: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("eigenvalue iteration did not converge within {iterations} iterations")]
    EigenNonConvergence { iterations: usize },

    #[error("{what} did not converge within {iterations} iterations")]
    NonConvergence { what: String, iterations: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no stabilizing grid point in the search box ({evaluated} points visited)")]
    EmptyRegion { evaluated: usize },

    #[error("step-size safeguard exhausted at iteration {iteration} after {halvings} halvings")]
    Safeguard {
        iteration: usize,
        halvings: usize,
        last_good: Box<nalgebra::DMatrix<f64>>,
    },

    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
