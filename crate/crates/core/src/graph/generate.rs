use rand::Rng;

use super::features::{one_hot_features, UnknownOpPolicy, Vocabulary};
use super::Graph;
use crate::error::{GapError, Result};
use crate::rng::seeded;

pub const DEFAULT_ATTACH_M: usize = 2;

/// G(n, p): every unordered pair is an edge independently with probability
/// `p`.
///
/// Uses geometric skipping over the pair sequence so the cost is
/// proportional to the number of edges rather than `n²`.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(GapError::InvalidArgument(format!(
            "edge probability must lie in [0, 1], got {p}"
        )));
    }
    let mut edges = Vec::new();
    if p == 1.0 {
        for v in 1..n {
            for u in 0..v {
                edges.push((u, v, 1.0));
            }
        }
    } else if p > 0.0 {
        let mut rng = seeded(seed);
        let log_q = (1.0 - p).ln();
        let (mut v, mut w): (usize, i64) = (1, -1);
        while v < n {
            let r: f64 = rng.random();
            let skip = ((1.0 - r).ln() / log_q).floor();
            w += 1 + skip as i64;
            while v < n && w >= v as i64 {
                w -= v as i64;
                v += 1;
            }
            if v < n {
                edges.push((w as usize, v, 1.0));
            }
        }
    }
    Graph::new(n, edges)
}

/// Undirected preferential attachment: a clique on `attach_m + 1` nodes,
/// then each new node links to `attach_m` distinct existing nodes chosen
/// with probability proportional to their current degree.
pub fn scale_free(n: usize, seed: u64, attach_m: usize) -> Result<Graph> {
    if attach_m < 1 || n <= attach_m {
        return Err(GapError::InvalidArgument(format!(
            "scale-free generator needs n > attach_m >= 1 (n = {n}, attach_m = {attach_m})"
        )));
    }
    let mut rng = seeded(seed);
    let mut edges = Vec::new();
    // every node appears once per incident edge endpoint
    let mut endpoints: Vec<usize> = Vec::new();
    let core = attach_m + 1;
    for v in 1..core {
        for u in 0..v {
            edges.push((u, v, 1.0));
            endpoints.push(u);
            endpoints.push(v);
        }
    }
    let mut targets = Vec::with_capacity(attach_m);
    for v in core..n {
        targets.clear();
        while targets.len() < attach_m {
            let t = endpoints[rng.random_range(0..endpoints.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((t, v, 1.0));
            endpoints.push(t);
            endpoints.push(v);
        }
    }
    Graph::new(n, edges)
}

/// Cliques of the given sizes joined in a chain: the last node of clique `i`
/// is linked to the first node of clique `i + 1` by a single bridge edge.
pub fn clique_chain(sizes: &[usize]) -> Result<Graph> {
    let mut edges = Vec::new();
    let mut start = 0;
    let mut prev_last: Option<usize> = None;
    for &s in sizes {
        if s == 0 {
            return Err(GapError::InvalidArgument("clique size must be positive".into()));
        }
        for v in start + 1..start + s {
            for u in start..v {
                edges.push((u, v, 1.0));
            }
        }
        if let Some(last) = prev_last {
            edges.push((last, start, 1.0));
        }
        prev_last = Some(start + s - 1);
        start += s;
    }
    Graph::new(start, edges)
}

/// One dense block of a planted-partition graph.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSpec {
    pub size: usize,
    /// Edge probability inside the block.
    pub p_in: f64,
    /// Op type carried by most nodes of the block.
    pub dominant_op: String,
}

/// Planted-partition graph with categorical node features.
///
/// Nodes are numbered block by block. Pairs inside a block are edges with
/// the block's `p_in`, pairs across blocks with `p_out`. Each node takes its
/// block's dominant op type with probability `dominance`, otherwise a
/// uniformly chosen entry of `background_ops`.
pub fn planted_blocks(
    blocks: &[BlockSpec],
    p_out: f64,
    background_ops: &[&str],
    dominance: f64,
    seed: u64,
) -> Result<Graph> {
    for p in blocks.iter().map(|b| b.p_in).chain([p_out, dominance]) {
        if !(0.0..=1.0).contains(&p) {
            return Err(GapError::InvalidArgument(format!("probability {p} outside [0, 1]")));
        }
    }
    if dominance < 1.0 && background_ops.is_empty() {
        return Err(GapError::InvalidArgument(
            "background op types required when dominance < 1".into(),
        ));
    }
    let mut rng = seeded(seed);
    let mut block_of = Vec::new();
    let mut ops = Vec::new();
    for (b, spec) in blocks.iter().enumerate() {
        for _ in 0..spec.size {
            block_of.push(b);
            let op = if rng.random::<f64>() < dominance {
                spec.dominant_op.clone()
            } else {
                background_ops[rng.random_range(0..background_ops.len())].to_string()
            };
            ops.push(op);
        }
    }
    let n = block_of.len();
    let mut edges = Vec::new();
    for v in 1..n {
        for u in 0..v {
            let p = if block_of[u] == block_of[v] {
                blocks[block_of[u]].p_in
            } else {
                p_out
            };
            if rng.random::<f64>() < p {
                edges.push((u, v, 1.0));
            }
        }
    }
    let mut names: Vec<&str> = blocks.iter().map(|b| b.dominant_op.as_str()).collect();
    names.extend_from_slice(background_ops);
    let vocab = Vocabulary::from_ops(names);
    let (x, names) = one_hot_features(&ops, &vocab, UnknownOpPolicy::Error)?;
    Graph::new(n, edges)?.with_features(x, Some(names))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn er_edge_count_matches_binomial_moments() {
        let g = erdos_renyi(1000, 0.1, 42).unwrap();
        let mean = 499_500.0 * 0.1;
        let sd = (499_500.0f64 * 0.1 * 0.9).sqrt();
        assert!((g.num_edges() as f64 - mean).abs() <= 3.0 * sd, "{}", g.num_edges());
    }

    #[test]
    fn er_boundaries_and_determinism() {
        assert_eq!(erdos_renyi(50, 0.0, 1).unwrap().num_edges(), 0);
        assert_eq!(erdos_renyi(10, 1.0, 1).unwrap().num_edges(), 45);
        assert_eq!(erdos_renyi(200, 0.1, 5).unwrap(), erdos_renyi(200, 0.1, 5).unwrap());
        assert!(erdos_renyi(10, 1.5, 0).is_err());
        assert!(erdos_renyi(10, -0.1, 0).is_err());
    }

    #[test]
    fn er_mean_over_seeds() {
        let expected = 19_900.0 * 0.1;
        let mean = (0..20)
            .map(|s| erdos_renyi(200, 0.1, s).unwrap().num_edges() as f64)
            .sum::<f64>()
            / 20.0;
        assert!((mean - expected).abs() / expected < 0.02, "{mean}");
    }

    #[test]
    fn scale_free_small_case_is_complete() {
        let g = scale_free(4, 9, 3).unwrap();
        assert_eq!(g.num_edges(), 6);
        assert!(scale_free(3, 0, 3).is_err());
        assert!(scale_free(5, 0, 0).is_err());
    }

    #[test]
    fn scale_free_is_heavy_tailed_and_deterministic() {
        for seed in 0..5 {
            let g = scale_free(1000, seed, 2).unwrap();
            let d = g.degree_vector();
            let mean = d.sum() / 1000.0;
            let max = d.0.iter().copied().fold(0.0, f64::max);
            assert!(max >= 5.0 * mean, "seed {seed}: max {max}, mean {mean}");
        }
        assert_eq!(scale_free(300, 3, 2).unwrap(), scale_free(300, 3, 2).unwrap());
    }

    #[test]
    fn two_triangles_with_bridge() {
        let g = clique_chain(&[3, 3]).unwrap();
        assert_eq!(g.num_nodes(), 6);
        assert_eq!(g.num_edges(), 7);
    }

    #[test]
    fn planted_blocks_have_features() {
        let blocks = [
            BlockSpec { size: 20, p_in: 0.5, dominant_op: "Conv2D".into() },
            BlockSpec { size: 10, p_in: 0.5, dominant_op: "MatMul".into() },
        ];
        let g = planted_blocks(&blocks, 0.01, &["Add", "Relu"], 0.8, 1).unwrap();
        assert_eq!(g.num_nodes(), 30);
        let x = g.node_features().unwrap();
        assert_eq!(x.cols(), 4);
        for r in 0..30 {
            assert_eq!(x.row(r).iter().sum::<f64>(), 1.0);
        }
    }
}
