//! Undirected weighted graphs and everything derived from their structure.

mod features;
mod generate;
mod io;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{GapError, Result};
use crate::numeric::{Matrix, SparseMatrix};

pub use features::{
    build_features, node_index_features, one_hot_features, pca_features, FeatureSpec,
    UnknownOpPolicy, Vocabulary, UNKNOWN_OP,
};
pub use generate::{
    clique_chain, erdos_renyi, planted_blocks, scale_free, BlockSpec, DEFAULT_ATTACH_M,
};
pub use io::{
    atomic_write, load_edge_list, load_featured_graph, load_graph, load_metis,
    parse_edge_list, parse_featured_graph, parse_metis, write_edge_list, write_featured_graph,
    write_metis, GraphFormat,
};

pub use crate::loss::HardAssignment;

/// An undirected edge stored with `u < v`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

/// Undirected graph on nodes `0..n` with positive edge weights and optional
/// node features.
///
/// Invariants: endpoints are in range, there are no self-loops, every
/// undirected edge appears once with `u < v`, and edges are sorted by
/// `(u, v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<Edge>,
    node_features: Option<Matrix>,
    feature_names: Option<Vec<String>>,
}

impl Graph {
    /// Builds a graph, rejecting self-loops, duplicate edges, out-of-range
    /// endpoints and non-positive weights.
    pub fn new(num_nodes: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        Self::build(num_nodes, edges, false)
    }

    /// Like [`Graph::new`], but repeated undirected edges are collapsed,
    /// keeping the first weight seen.
    pub fn from_edges_dedup(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        Self::build(num_nodes, edges, true)
    }

    pub fn unweighted(num_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::new(num_nodes, edges.iter().map(|&(u, v)| (u, v, 1.0)))
    }

    fn build(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
        dedup: bool,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (a, b, w) in edges {
            if a >= num_nodes || b >= num_nodes {
                return Err(GapError::InvalidGraph(format!(
                    "edge ({a}, {b}) has an endpoint outside 0..{num_nodes}"
                )));
            }
            if a == b {
                return Err(GapError::InvalidGraph(format!("self-loop on node {a}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(GapError::InvalidGraph(format!(
                    "edge ({a}, {b}) has non-positive weight {w}"
                )));
            }
            let (u, v) = if a < b { (a, b) } else { (b, a) };
            if !seen.insert((u, v)) {
                if dedup {
                    continue;
                }
                return Err(GapError::InvalidGraph(format!("duplicate edge ({u}, {v})")));
            }
            out.push(Edge { u, v, w });
        }
        out.sort_by(|x, y| (x.u, x.v).cmp(&(y.u, y.v)));
        Ok(Graph {
            num_nodes,
            edges: out,
            node_features: None,
            feature_names: None,
        })
    }

    /// Attaches an `n x d` feature matrix with optional column names.
    pub fn with_features(mut self, features: Matrix, names: Option<Vec<String>>) -> Result<Self> {
        if features.rows() != self.num_nodes {
            return Err(GapError::shape(
                "Graph::with_features",
                format!("{} feature rows for {} nodes", features.rows(), self.num_nodes),
            ));
        }
        if let Some(n) = &names {
            if n.len() != features.cols() {
                return Err(GapError::shape(
                    "Graph::with_features",
                    format!("{} names for {} columns", n.len(), features.cols()),
                ));
            }
        }
        self.node_features = Some(features);
        self.feature_names = names;
        Ok(self)
    }

    pub fn without_features(mut self) -> Self {
        self.node_features = None;
        self.feature_names = None;
        self
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_features(&self) -> Option<&Matrix> {
        self.node_features.as_ref()
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.w).sum()
    }

    pub fn is_weighted(&self) -> bool {
        self.edges.iter().any(|e| e.w != 1.0)
    }

    pub fn degree_vector(&self) -> DegreeVector {
        let mut d = vec![0.0; self.num_nodes];
        for e in &self.edges {
            d[e.u] += e.w;
            d[e.v] += e.w;
        }
        DegreeVector(d)
    }

    /// Neighbor lists `N(v)` with edge weights, each sorted by node id.
    pub fn neighbors(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for e in &self.edges {
            adj[e.u].push((e.v, e.w));
            adj[e.v].push((e.u, e.w));
        }
        for list in &mut adj {
            list.sort_by_key(|&(j, _)| j);
        }
        adj
    }

    /// Symmetric weighted adjacency matrix `A`.
    pub fn adjacency(&self) -> SparseMatrix {
        let mut t = Vec::with_capacity(2 * self.edges.len());
        for e in &self.edges {
            t.push((e.u, e.v, e.w));
            t.push((e.v, e.u, e.w));
        }
        SparseMatrix::from_triplets(self.num_nodes, self.num_nodes, t)
            .expect("graph invariants guarantee a valid adjacency")
    }

    /// `D̃^{-1/2} (A + I) D̃^{-1/2}` where `D̃` holds the row sums of `A + I`.
    pub fn normalized_adjacency(&self) -> NormalizedAdjacency {
        let deg = self.degree_vector();
        let inv_sqrt: Vec<f64> = deg.0.iter().map(|d| 1.0 / (d + 1.0).sqrt()).collect();
        let mut t = Vec::with_capacity(2 * self.edges.len() + self.num_nodes);
        for i in 0..self.num_nodes {
            t.push((i, i, inv_sqrt[i] * inv_sqrt[i]));
        }
        for e in &self.edges {
            let v = e.w * inv_sqrt[e.u] * inv_sqrt[e.v];
            t.push((e.u, e.v, v));
            t.push((e.v, e.u, v));
        }
        NormalizedAdjacency(
            SparseMatrix::from_triplets(self.num_nodes, self.num_nodes, t)
                .expect("graph invariants guarantee a valid adjacency"),
        )
    }

    /// Unnormalized Laplacian `diag(D) - A`.
    pub fn laplacian(&self) -> SparseMatrix {
        let deg = self.degree_vector();
        let mut t = Vec::with_capacity(2 * self.edges.len() + self.num_nodes);
        for (i, &d) in deg.0.iter().enumerate() {
            t.push((i, i, d));
        }
        for e in &self.edges {
            t.push((e.u, e.v, -e.w));
            t.push((e.v, e.u, -e.w));
        }
        SparseMatrix::from_triplets(self.num_nodes, self.num_nodes, t)
            .expect("graph invariants guarantee a valid Laplacian")
    }

    /// Connected-component label per node, labels numbered in order of
    /// first appearance.
    pub fn connected_components(&self) -> Vec<usize> {
        let adj = self.neighbors();
        let mut label = vec![usize::MAX; self.num_nodes];
        let mut next = 0;
        for s in 0..self.num_nodes {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            let mut stack = vec![s];
            while let Some(x) = stack.pop() {
                for &(y, _) in &adj[x] {
                    if label[y] == usize::MAX {
                        label[y] = next;
                        stack.push(y);
                    }
                }
            }
            next += 1;
        }
        label
    }

    /// Subgraph induced by `nodes` (relabelled `0..nodes.len()` in the given
    /// order). Features are carried over.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<Graph> {
        let mut index = vec![usize::MAX; self.num_nodes];
        for (k, &v) in nodes.iter().enumerate() {
            if v >= self.num_nodes {
                return Err(GapError::InvalidArgument(format!("node {v} out of range")));
            }
            if index[v] != usize::MAX {
                return Err(GapError::InvalidArgument(format!("node {v} listed twice")));
            }
            index[v] = k;
        }
        let edges = self.edges.iter().filter_map(|e| {
            let (a, b) = (index[e.u], index[e.v]);
            (a != usize::MAX && b != usize::MAX).then_some((a, b, e.w))
        });
        let mut g = Graph::new(nodes.len(), edges)?;
        if let Some(x) = &self.node_features {
            let mut data = Vec::with_capacity(nodes.len() * x.cols());
            for &v in nodes {
                data.extend_from_slice(x.row(v));
            }
            g = g.with_features(Matrix::from_raw(nodes.len(), x.cols(), data), self.feature_names.clone())?;
        }
        Ok(g)
    }

    /// Relabels node `i` as `perm[i]`, permuting feature rows to match.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.num_nodes {
            return Err(GapError::InvalidArgument("permutation length mismatch".into()));
        }
        let edges = self.edges.iter().map(|e| (perm[e.u], perm[e.v], e.w));
        let mut g = Graph::new(self.num_nodes, edges)?;
        if let Some(x) = &self.node_features {
            let mut y = Matrix::zeros(x.rows(), x.cols());
            for (i, &p) in perm.iter().enumerate() {
                y.row_mut(p).copy_from_slice(x.row(i));
            }
            g = g.with_features(y, self.feature_names.clone())?;
        }
        Ok(g)
    }
}

/// Weighted degree of every node.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeVector(pub Vec<f64>);

impl DegreeVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Degrees as a `1 x n` row.
    pub fn to_row(&self) -> Matrix {
        Matrix::from_raw(1, self.0.len(), self.0.clone())
    }
}

/// Symmetric normalized adjacency with self-connections, the propagation
/// matrix of the GCN layers.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedAdjacency(pub SparseMatrix);

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &SparseMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> SparseMatrix {
        self.0
    }
}

/// Number of partitions `g`, validated against the node count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionConfig {
    num_partitions: usize,
}

impl PartitionConfig {
    pub fn new(num_partitions: usize, num_nodes: usize) -> Result<Self> {
        if num_partitions < 2 {
            return Err(GapError::InvalidArgument(format!(
                "need at least 2 partitions, got {num_partitions}"
            )));
        }
        if num_partitions > num_nodes {
            return Err(GapError::InvalidArgument(format!(
                "{num_partitions} partitions for {num_nodes} nodes"
            )));
        }
        Ok(PartitionConfig { num_partitions })
    }

    pub fn num_partitions(&self) -> usize {
        self.num_partitions
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn cycle(n: usize) -> Graph {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::unweighted(n, &edges).unwrap()
    }

    fn path(n: usize) -> Graph {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        Graph::unweighted(n, &edges).unwrap()
    }

    #[test]
    fn degrees() {
        assert_eq!(cycle(4).degree_vector().0, vec![2.0; 4]);
        assert_eq!(path(4).degree_vector().0, vec![1.0, 2.0, 2.0, 1.0]);
        let g = Graph::new(2, [(0, 1, 2.5)]).unwrap();
        assert_eq!(g.degree_vector().0, vec![2.5, 2.5]);
        assert_eq!(g.degree_vector().sum(), 2.0 * g.total_weight());
    }

    #[test]
    fn invariants_enforced() {
        assert!(Graph::unweighted(2, &[(0, 0)]).is_err());
        assert!(Graph::unweighted(2, &[(0, 2)]).is_err());
        assert!(Graph::unweighted(3, &[(0, 1), (1, 0)]).is_err());
        assert!(Graph::new(2, [(0, 1, -1.0)]).is_err());
        let g = Graph::from_edges_dedup(3, [(1, 0, 1.0), (0, 1, 1.0), (2, 1, 1.0)]).unwrap();
        assert_eq!(g.num_edges(), 2);
        assert!(g.edges().iter().all(|e| e.u < e.v));
    }

    #[test]
    fn normalized_adjacency_examples() {
        let single = Graph::new(1, []).unwrap();
        assert_eq!(single.normalized_adjacency().0.to_dense().data(), &[1.0]);

        let k2 = Graph::unweighted(2, &[(0, 1)]).unwrap();
        let a = k2.normalized_adjacency().0.to_dense();
        for &v in a.data() {
            assert!((v - 0.5).abs() < 1e-15);
        }

        let c4 = cycle(4).normalized_adjacency();
        assert_eq!(c4.0.nnz(), 12);
        for (_, _, v) in c4.0.nonzeros() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(c4.0.is_symmetric());
    }

    #[test]
    fn components_and_subgraph() {
        let g = Graph::unweighted(5, &[(0, 1), (3, 4)]).unwrap();
        assert_eq!(g.connected_components(), vec![0, 0, 1, 2, 2]);
        let sub = g.induced_subgraph(&[4, 3, 0]).unwrap();
        assert_eq!(sub.num_edges(), 1);
        assert_eq!(sub.edges()[0], Edge { u: 0, v: 1, w: 1.0 });
    }

    #[test]
    fn partition_config_bounds() {
        assert!(PartitionConfig::new(1, 10).is_err());
        assert!(PartitionConfig::new(11, 10).is_err());
        assert_eq!(PartitionConfig::new(3, 10).unwrap().num_partitions(), 3);
    }
}
