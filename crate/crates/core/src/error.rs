//! Error type shared across the library.

use thiserror::Error;

/// Errors produced by kernel algebra, simulation, and the diagnostics.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("empty kernel sequence")]
    EmptySequence,

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("parameter {theta} is outside the admissible domain {domain}")]
    InadmissibleTheta { theta: f64, domain: String },

    #[error("epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),

    #[error("cap must be at least 1")]
    InvalidCap,

    #[error("state index {x} out of range for {dim} states")]
    StateOutOfRange { x: usize, dim: usize },

    #[error("kernel family violates stationarity at theta={theta}: tv={tv:.3e}")]
    NotStationary { theta: f64, tv: f64 },

    #[error("policy cannot be propagated exactly; use the Monte Carlo estimator")]
    NotPropagatable,

    #[error("policy statistics left the declared finite set")]
    StatsNotDeclared,

    #[error("tail matrix was built from {got} times, expected {expected}")]
    TailProvenance { expected: String, got: String },

    #[error("burn-in {n_burn} leaves no iteration-grid points in the window")]
    EmptyWindow { n_burn: u64 },

    #[error("reference convergence time exceeds cap {0}")]
    ReferenceExceedsCap(u64),

    #[error("nested estimation budget exceeded: {0} chain steps requested")]
    BudgetExceeded(u64),

    #[error("unknown scenario id `{0}`")]
    UnknownScenario(String),

    #[error("invalid scenario override: {0}")]
    InvalidOverride(String),

    #[error("inconsistent epsilon across diagnostic inputs: {0} vs {1}")]
    EpsilonMismatch(f64, f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
