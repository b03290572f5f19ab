use thiserror::Error;

/// Errors surfaced by problem oracles, subproblem solvers and the driver.
#[derive(Debug, Clone, Error)]
pub enum SolverError {
    /// A problem oracle produced a non-finite value.
    #[error("non-finite {what} evaluation at x = {x:?}")]
    EvaluationFailure { what: &'static str, x: Vec<f64> },

    /// The reduced Hessian is not positive definite on the null space of the
    /// constraint Jacobian.
    #[error(
        "reduced Hessian fails the null-space curvature bound (smallest eigenvalue {min_eig:.3e})"
    )]
    CurvatureFailure { min_eig: f64 },

    /// An operation was called on input it cannot meaningfully handle.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// An iterative solver produced a non-finite iterate.
    #[error("numeric failure: {0}")]
    NumericFailure(String),

    /// Solver configuration violates a documented invariant.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A user-supplied Hessian is not symmetric.
    #[error("supplied Hessian is not symmetric (max defect {0:.3e})")]
    AsymmetricHessian(f64),
}
