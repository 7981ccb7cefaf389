use thiserror::Error;

/// Library-wide error type.
///
/// Variants are grouped by how the CLI maps them to exit codes:
/// configuration and validation problems exit with 2, numerical
/// failures (solver breakdown, rejection budgets, non-finite values)
/// exit with 3.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration, precondition violation, or unusable input.
    #[error("configuration error: {0}")]
    Config(String),

    /// A point fell outside the grid extent.
    #[error("point {point:?} lies outside the grid extent on axis {axis}")]
    OutOfDomain { point: Vec<f64>, axis: usize },

    /// Iterative solver failed to reach tolerance within its budget.
    #[error("solver did not converge: {context} (iterations {iterations}, relative residual {residual:.3e})")]
    SolverDiverged {
        context: String,
        iterations: usize,
        residual: f64,
    },

    /// Accept-reject sampling exhausted its attempt budget.
    #[error("conditioning rejection budget exhausted after {attempts} attempts in {context} (empirical acceptance estimate {acceptance_estimate:.3e}); increase n, M0, or the budget")]
    RejectionBudget {
        attempts: u32,
        acceptance_estimate: f64,
        context: String,
    },

    /// A composed intermediate left the closed unit cube by more than the clamp tolerance.
    #[error("composition error: intermediate value {value} outside [-1-{tol}, 1+{tol}] at layer {layer}, component {component}")]
    Composition {
        layer: usize,
        component: usize,
        value: f64,
        tol: f64,
    },

    /// A structure lies outside the hyperprior support.
    #[error("structure outside hyperprior support: {0}")]
    Support(String),

    /// A quantity that must be finite was not.
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// CLI exit code bucket: 2 for configuration errors, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::OutOfDomain { .. } | Error::Support(_) => 2,
            Error::SolverDiverged { .. }
            | Error::RejectionBudget { .. }
            | Error::Composition { .. }
            | Error::NonFinite(_) => 3,
            Error::Io(_) | Error::Serde(_) => 2,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
