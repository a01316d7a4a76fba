use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no fixed point: {0}")]
    NoSolution(String),
    #[error("{what} did not converge (residual {residual:e})")]
    NonConvergence { what: String, residual: f64 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

impl Error {
    /// Short stable identifier, used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::NoSolution(_) => "no_solution",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Degenerate(_) => "degenerate",
            Error::Linalg(_) => "linalg",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
