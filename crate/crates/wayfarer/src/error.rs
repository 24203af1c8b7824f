use thiserror::Error;

use crate::graph::{EdgeKey, NodeId};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("unknown node id {0}")]
    UnknownNode(NodeId),

    #[error("unknown edge {0}")]
    UnknownEdge(EdgeKey),

    #[error("generation budget exhausted: no connected graph for (n={n}, p={p}) in {attempts} attempts")]
    GenerationBudget { n: usize, p: f64, attempts: usize },

    #[error("gram matrix factorization failed after jitter escalation")]
    Factorization,

    #[error(
        "inconsistent observation: input already stored with value {stored}, re-observed as {new}"
    )]
    InconsistentObservation { stored: f64, new: f64 },

    #[error("node {to} is not adjacent to {from}")]
    NotAdjacent { from: NodeId, to: NodeId },

    #[error("policy returned non-adjacent node {to} from {from} at step {step}")]
    PolicyFault { from: NodeId, to: NodeId, step: usize },

    #[error("path enumeration guard: H={h} with {n} nodes exceeds the exhaustive budget")]
    EnumerationGuard { h: usize, n: usize },

    #[error("walk is not connected: {0} does not follow its predecessor")]
    DisconnectedWalk(NodeId),

    #[error("instance is not acyclic")]
    NotAcyclic,

    #[error("oracle expansion cap exhausted; result is indeterminate")]
    Indeterminate,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Other(String),
}
