//! Distributed estimation of a high-dimensional field by networked agents
//! that each reconstruct only the components in their interest set.
//!
//! Agents combine two potentials at every step: a consensus term built from
//! interest-censored neighbor messages, and an innovation term driven by the
//! local observation residual, with separately decaying weights. The crate
//! provides the graph and projection algebra behind that update, the update
//! itself in per-agent and stacked compact forms, a full-state baseline
//! estimator, executable model checks (global observability, interest
//! consistency, per-component induced-subgraph connectivity, subspace
//! ellipticity, gain bounds), and the asymptotic-covariance analysis of the
//! scaled estimation error.

pub mod analysis;
pub mod censor;
pub mod error;
pub mod estimator;
pub mod graph;
pub mod sensing;
pub mod stream;

pub use error::{Error, Result};
