use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent matrix or vector dimensions.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("invalid weight vector: {0}")]
    InvalidWeights(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// rank(C2 G2) != p - p_H: no gain can keep the estimation errors bounded.
    #[error("boundedness precondition violated: rank(C2*G2) = {rank} but p - p_H = {expected}")]
    BoundednessPrecondition { rank: usize, expected: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Structural necessary condition for observer existence does not hold.
    #[error("necessary condition for observer existence failed: {0}")]
    NecessaryConditionFailed(String),

    #[error("no eta-bounded H-infinity observer found (solver status: {status})")]
    Infeasible { status: String },

    #[error("SDP solver failed (status: {status})")]
    SolverFailure { status: String },

    #[error("ill-conditioned certificate: cond(S) = {cond:e} exceeds {limit:e}")]
    IllConditioned { cond: f64, limit: f64 },

    #[error("convergence not certifiable: {0}")]
    ConvergenceNotCertifiable(String),

    /// theta >= 1: steady-state radii do not exist.
    #[error("radii do not converge: theta = {theta} >= 1")]
    RadiiDiverge { theta: f64 },

    #[error("containment violated in trial {trial} (seed {seed}) at step {step}: {detail}")]
    ContainmentViolation {
        trial: usize,
        seed: u64,
        step: usize,
        detail: String,
    },
}
