use thiserror::Error;

/// Errors produced by chain construction, samplers, fits, and solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// A state or point needs at least two coordinates.
    #[error("dimension must be at least 2, got {0}")]
    InvalidDimension(usize),

    /// Two objects that must share a dimension do not.
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    /// Two discrete states that must conserve the coin total do not.
    #[error("conserved total mismatch: {left} vs {right}")]
    TotalMismatch { left: u64, right: u64 },

    /// Coordinates fail to describe a point of the simplex.
    #[error("invalid simplex point: {0}")]
    InvalidPoint(String),

    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A density evaluation produced a non-finite value.
    #[error("density is not finite at the requested point")]
    NonFiniteDensity,

    /// No state maps to the requested target under the given pair move.
    #[error("no predecessor state exists for pair ({i}, {j})")]
    EmptyPreimage { i: usize, j: usize },

    /// Enumerating the discrete simplex would exceed the configured cap.
    #[error("state space has {states} states, exceeding the cap of {cap}")]
    StateSpaceTooLarge { states: u64, cap: u64 },

    /// An iterative method ran out of iterations before meeting its tolerance.
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },

    /// A statistic was requested from too small a sample.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The operation requires a strictly interior point of the simplex.
    #[error("point must be strictly interior to the simplex")]
    InteriorRequired,

    /// A time step produced an invalid update; retry with the suggested step.
    #[error("time step too large; retry with dt <= {suggested_dt}")]
    UnstableStep { suggested_dt: f64 },

    /// Model parameters violate a validity constraint.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

pub type Result<T> = std::result::Result<T, Error>;
