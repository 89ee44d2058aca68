use thiserror::Error;

/// Errors raised while building or solving mean-risk problems.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("covariance matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("invalid risk weighting: {0}")]
    InvalidRisk(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("fixing variable at position {position} to {value} is infeasible")]
    InfeasibleFixing { position: usize, value: i64 },

    #[error("remaining budget is exhausted")]
    BudgetExhausted,

    #[error("no free variables remain")]
    DimensionZero,

    #[error("gradient undefined at a point with zero risk")]
    GradientUndefined,

    #[error("line search exceeded {0} backtracking steps")]
    LineSearchStall(usize),

    #[error("starting point is not feasible for the capped simplex")]
    InfeasibleStart,

    #[error("enumeration budget exceeded: {0} assignments")]
    EnumerationBudgetExceeded(f64),

    #[error("instance file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
