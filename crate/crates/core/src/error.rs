//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("aperture {theta0} out of range for N={n}: expected {expected}")]
    ApertureOutOfRange { n: usize, theta0: f64, expected: &'static str },

    #[error("invalid cone: {0}")]
    InvalidCone(String),

    #[error("angular node count {0} too small (need at least {1})")]
    TooFewAngularNodes(usize, usize),

    #[error("eigensolve did not converge within {0} iterations")]
    EigenNoConvergence(usize),

    #[error("eigensolve stagnated: eigenvalue gap too small after {0} iterations")]
    EigenStagnation(usize),

    #[error("zeroth-order coefficient {m} is not below the cross-section eigenvalue {lambda}")]
    NotCoercive { m: f64, lambda: f64 },

    #[error("decay window violation: {0}")]
    WindowViolation(String),

    #[error("barrier certificate invalid: interior ratio minimum {ratio_min} below {threshold}")]
    BarrierInvalid { ratio_min: f64, threshold: f64 },

    #[error("boundary data is identically zero")]
    ZeroBoundaryData,

    #[error("boundary data must be nonnegative (min {0})")]
    NegativeBoundaryData(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("linear system is singular (zero pivot at column {0})")]
    SingularSystem(usize),

    #[error("linear solve residual {residual} exceeds tolerance {tol}")]
    ResidualTooLarge { residual: f64, tol: f64 },

    #[error("potential is identically zero; linearized eigenproblem undefined")]
    PotentialZero,

    #[error("Jacobian is singular at this point; use the augmented continuation system")]
    JacobianSingular,

    #[error("Newton iteration did not converge within {0} steps")]
    NewtonNoConvergence(usize),

    #[error("corrector failed to converge even at the minimum step size {0}")]
    CorrectorFailed(f64),

    #[error("bisection bracket could not be established: {0}")]
    BracketFailed(String),

    #[error("monotone iteration violated monotonicity by {0} (beyond solver noise)")]
    MonotonicityViolated(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
