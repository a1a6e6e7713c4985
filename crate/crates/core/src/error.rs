use thiserror::Error;

/// Errors raised by the equilibrium solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Game primitives violate `b > 1` or `m > b - 1`.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested quantity does not exist in this parameter regime.
    #[error("regime error: {0}")]
    Regime(String),

    /// An iterative method hit its iteration cap.
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// A property guaranteed by the theory failed numerically; usually a
    /// sign that a distributional assumption does not hold.
    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    /// The equilibrium sits on a corner where the requested derivative is undefined.
    #[error("corner solution: {0}")]
    CornerSolution(String),
}

pub type Result<T> = std::result::Result<T, Error>;
