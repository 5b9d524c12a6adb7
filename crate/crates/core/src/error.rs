use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("construction error: {0}")]
    Construction(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("cannot split on coordinate {coordinate}: block x_{coordinate} = {empty_value} is empty")]
    Split { coordinate: usize, empty_value: u8 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("dimension mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },

    #[error("no covering coupling exists: {0}")]
    Infeasible(String),

    #[error("stochastic covering property violated: {0}")]
    ScpViolation(String),

    #[error("full SCP enumeration refused for n = {n} > ceiling {ceiling}; use sampled mode")]
    Ceiling { n: usize, ceiling: usize },

    #[error("generator is reducible; communicating classes: {0:?}")]
    Reducible(Vec<Vec<String>>),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("parse error: {0}")]
    Parse(String),
}
