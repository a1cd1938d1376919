//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("graph must have at least one node")]
    EmptyGraph,

    #[error("edge ({i}, {j}) out of range for a graph on {n} nodes (1-based)")]
    EdgeOutOfRange { i: usize, j: usize, n: usize },

    #[error("self-loop at node {i} (1-based) not allowed in a simple graph")]
    SelfLoop { i: usize },

    #[error("duplicate edge ({i}, {j}) (1-based)")]
    DuplicateEdge { i: usize, j: usize },

    #[error("node set for an induced subgraph is empty")]
    EmptyNodeSet,

    #[error("interest set is empty")]
    EmptyInterestSet,

    #[error("interest index {index} out of range [1, {n}] (1-based)")]
    InterestOutOfRange { index: usize, n: usize },

    #[error("duplicate interest index {index} (1-based)")]
    DuplicateInterest { index: usize },

    #[error("component {component} (1-based) is in no agent's interest set")]
    UnclaimedComponent { component: usize },

    #[error("noise covariance is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("stacked state is not in the interest subspace: residual norm {residual:e}")]
    OutsideInterestSubspace { residual: f64 },

    #[error(
        "gain too small for finite asymptotic covariance: smallest scaled eigenvalue \
         {lambda_min} must exceed 1/2"
    )]
    GainTooSmall { lambda_min: f64 },

    #[error("gain condition unsatisfiable: {term} = {value:e} must be positive")]
    GainUnsatisfiable { term: &'static str, value: f64 },

    #[error("need at least {min} trials, got {got}")]
    InsufficientTrials { min: usize, got: usize },

    #[error("need at least {min} points in the fit window, got {got}")]
    InsufficientPoints { min: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
