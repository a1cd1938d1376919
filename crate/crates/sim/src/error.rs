//! Harness-level errors layered over the core library's.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] cirfe_core::Error),

    #[error("unknown scenario '{0}' (not a built-in name or readable file)")]
    UnknownScenario(String),

    #[error("unknown estimator '{0}'")]
    UnknownEstimator(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "model checks failed: {reasons:?}; run the check subcommand for the full report"
    )]
    ModelChecksFailed { reasons: Vec<String> },

    #[error(
        "innovation gain {gain} is below the sufficient floor {floor} \
         (set enforce_gain_floor = false to run anyway)"
    )]
    GainBelowFloor { gain: f64, floor: f64 },

    #[error("comparison configs must share model, schedule, sizes, and seed: {0}")]
    ComparisonMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
