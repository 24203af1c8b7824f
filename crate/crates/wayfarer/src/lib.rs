//! Bayesian traversal of a known graph with unknown edge costs and node
//! rewards under Gaussian-process beliefs: online policies, an exact
//! clairvoyant oracle with structural pruning, and a reproducible
//! Erdős–Rényi benchmark harness.

pub mod belief;
pub mod bench;
pub mod error;
pub mod graph;
pub mod oracle;
pub mod policy;
pub mod sim;

pub use error::{Error, Result};
