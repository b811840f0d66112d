use thiserror::Error;

use crate::instance::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("instance failed validation with {} violation(s); first: {}", .0.len(), .0[0])]
    InvalidInstance(Vec<Violation>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear program is infeasible (phase-one residual {0:e})")]
    Infeasible(f64),

    #[error("linear program is unbounded (entering column {0})")]
    Unbounded(usize),

    #[error("simplex stopped after {0} pivots without reaching optimality")]
    IterationLimit(usize),

    #[error("numerical trouble in the simplex: {0}")]
    Numerical(String),

    #[error("policy produced an infeasible action at t={t}: {detail}")]
    InfeasibleAction { t: usize, detail: String },

    #[error("state {state} of cluster {cluster} is not indexable: {reason}")]
    NotIndexable {
        cluster: usize,
        state: usize,
        reason: String,
    },

    #[error("exact solver refused: {0}")]
    TooLarge(String),
}
