//! Scenario configuration, Monte Carlo orchestration, estimator comparisons,
//! and result emission for the censored consensus+innovations field
//! estimator. Every run is a pure function of its configuration: identical
//! configs produce identical output bytes.

pub mod checks;
pub mod compare;
pub mod error;
pub mod report;
pub mod runner;
pub mod scenario;

pub use error::{Error, Result};
