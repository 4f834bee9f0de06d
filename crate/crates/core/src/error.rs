use thiserror::Error;

/// Errors raised across the solver stack.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("unsupported order of accuracy p={0} (expected 2 or 4)")]
    UnsupportedOrder(usize),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("ghost layer is stale (data generation {data}, ghosts refreshed at {ghosts})")]
    StaleGhosts { data: u64, ghosts: u64 },

    #[error("mixed boundary conditions: {0}")]
    MixedBoundaries(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("implicit time-stepping needs at least 5 time-steps per period (got N_t={0})")]
    TooFewImplicitSteps(usize),

    #[error("explicit scheme unstable for eigenvalue {lambda} with dt={dt} (lambda*dt > 2)")]
    ExplicitUnstable { lambda: f64, dt: f64 },

    #[error("resonance: eigenvalue {lambda} (index {index}) coincides with frequency {omega}")]
    Resonance { index: usize, lambda: f64, omega: f64 },

    #[error("linear solver failed: {0}")]
    SolverFailure(String),

    #[error("breakdown in {0}")]
    Breakdown(String),

    #[error("singular or near-singular system: {0}")]
    Singular(String),

    #[error("dimension {dim} exceeds limit {limit}")]
    TooLarge { dim: usize, limit: usize },

    #[error("insufficient residual history: need {needed}, have {have}")]
    InsufficientHistory { needed: usize, have: usize },

    #[error("newton iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("arithmetic overflow guard: {0}")]
    Overflow(String),
}

pub type Result<T> = std::result::Result<T, Error>;
