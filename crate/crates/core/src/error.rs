use thiserror::Error;

/// Errors raised by the solvers and the threshold calculus.
///
/// Top-level solvers report non-convergence through their result types
/// (`converged` flags, verdicts). `NotConverged` is raised only when a
/// computation needs a converged sub-solve to continue (for instance, the
/// domain constants need a converged torsion function).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("field is not finite at node {node}")]
    NonFinite { node: usize },

    #[error("fields live on different domains")]
    DomainMismatch,

    #[error("no sign change of the defining function in [{lo:e}, {hi:e}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("subsolution exceeds supersolution at node {node} by {excess:e}")]
    BoxOrdering { node: usize, excess: f64 },

    #[error("iterate exceeds the supersolution at node {node} by {excess:e}")]
    AboveSupersolution { node: usize, excess: f64 },

    #[error("iterate leaves the box F: {0}")]
    OutsideBox(String),

    #[error("inner iteration lost monotonicity at node {node} (drop {drop:e})")]
    MonotonicityLoss { node: usize, drop: f64 },

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
