use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {0} lies outside the admissible disk region")]
    Domain(String),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("resource limit exceeded: {what} (limit {limit})")]
    ResourceLimit { what: String, limit: usize },

    #[error("reduction into the fundamental domain did not converge after {iterations} steps")]
    NonConvergence { iterations: usize },

    #[error("meshing failed: {0}")]
    Meshing(String),

    #[error("linear solver diverged after {iterations} iterations (relative residual {residual:e})")]
    SolverDivergence { iterations: usize, residual: f64 },

    #[error("input field contains non-finite values")]
    NonFinite,

    #[error("matrix is not positive definite: {0}")]
    Indefinite(String),

    #[error("rank-deficient Gram matrix: eigenvalue ratio {ratio:e}")]
    RankDeficient { ratio: f64 },

    #[error("WP normalization violated: |‖μ₀‖ − 1| = {deviation:e}")]
    Normalization { deviation: f64 },

    #[error("invalid lapse function: {0}")]
    InvalidLapse(String),

    #[error("finite-difference step too large: Richardson estimate {estimate:e} exceeds {tolerance:e}")]
    StepTooLarge { estimate: f64, tolerance: f64 },

    #[error("Newton iteration diverged at t = {t} (last residual {residual:e})")]
    NewtonDivergence { t: f64, residual: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {detail}")]
    Parse { what: String, detail: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(what: impl Into<String>, detail: impl ToString) -> Self {
        Error::Parse {
            what: what.into(),
            detail: detail.to_string(),
        }
    }
}
