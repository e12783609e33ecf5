//! Error taxonomy shared by the whole workspace.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration: bad exponents, malformed charts, incompatible
    /// grid parameters. Maps to exit code 1 in the CLI.
    #[error("configuration error: {0}")]
    Config(String),

    /// Argument outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// Time stepping aborted (NaN or runaway growth).
    #[error("solver aborted at step {step} (tau = {tau:.6}): {reason}")]
    SolverAbort { step: usize, tau: f64, reason: String },

    /// A spatial norm came out non-finite at a quadrature node.
    #[error("non-finite norm at node {node} (x = {x:.6e})")]
    NonFiniteNorm { node: usize, x: f64 },

    /// Picard iteration failed to converge.
    #[error("iteration did not converge: {0}")]
    NoConvergence(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
