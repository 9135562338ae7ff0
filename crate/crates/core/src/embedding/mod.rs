//! Node embeddings fed to the partition head.

mod gcn;
mod sage;

use serde::{Deserialize, Serialize};

pub use gcn::{gcn_forward, GcnParams};
pub use sage::{sage_forward, sample_neighbors, NeighborSample, ProjectionBias, SageParams, Sampling};

/// Which embedding sits in front of the head.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingKind {
    #[default]
    Gcn,
    Sage,
    /// Features go straight into the head.
    None,
}

/// Whether embedding weights receive gradient updates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingMode {
    #[default]
    Trained,
    /// Frozen at random initialization; only the head learns.
    Offline,
}

/// Per-node adjacency lists without weights, in ascending order.
pub fn adjacency_lists(g: &crate::graph::Graph) -> Vec<Vec<usize>> {
    g.neighbors()
        .into_iter()
        .map(|ns| ns.into_iter().map(|(v, _)| v).collect())
        .collect()
}
