use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::Graph;
use crate::loss::{balance_error_value, exact_ncut, exact_total_cut, expected_ncut_value, HardAssignment, LossGraph, LossPath};
use crate::numeric::Matrix;

/// Total cut weight over total edge weight; 0 for an edgeless graph.
pub fn edge_cut_ratio(g: &Graph, a: &HardAssignment) -> Result<f64> {
    let total = g.total_weight();
    let cut = exact_total_cut(g, a)?;
    Ok(if total > 0.0 { cut / total } else { 0.0 })
}

/// `1 − (1/g) Σ_k (p_k − 1/g)²` where `p_k` is the fraction of nodes in
/// partition `k`.
pub fn balancedness(a: &HardAssignment) -> f64 {
    balancedness_of_sizes(&a.sizes())
}

pub fn balancedness_of_sizes(sizes: &[usize]) -> f64 {
    let n: usize = sizes.iter().sum();
    let g = sizes.len() as f64;
    if n == 0 || sizes.is_empty() {
        return 1.0;
    }
    let mse = sizes
        .iter()
        .map(|&s| (s as f64 / n as f64 - 1.0 / g).powi(2))
        .sum::<f64>()
        / g;
    1.0 - mse
}

/// Highest balancedness any assignment of `n` nodes to `g` partitions can
/// reach; below 1 when `g` does not divide `n`.
pub fn best_balancedness(n: usize, g: usize) -> f64 {
    if g == 0 {
        return 1.0;
    }
    let sizes: Vec<usize> = (0..g).map(|k| n / g + usize::from(k < n % g)).collect();
    balancedness_of_sizes(&sizes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub edge_cut_ratio: f64,
    pub balancedness: f64,
    /// Best balancedness reachable for this `(n, g)`.
    pub best_balancedness: f64,
    pub exact_ncut: f64,
    /// Expected Ncut of the probabilities the assignment came from, or of
    /// its one-hot encoding when there are none.
    pub expected_ncut: f64,
    pub balance_error: f64,
    pub partition_sizes: Vec<usize>,
    pub wall_clock_ms: f64,
}

impl MetricsReport {
    pub fn compute(g: &Graph, a: &HardAssignment, y: Option<&Matrix>, wall_clock_ms: f64) -> Result<Self> {
        let lg = LossGraph::new(g);
        let one_hot;
        let y = match y {
            Some(y) => y,
            None => {
                one_hot = a.one_hot();
                &one_hot
            }
        };
        Ok(MetricsReport {
            edge_cut_ratio: edge_cut_ratio(g, a)?,
            balancedness: balancedness(a),
            best_balancedness: best_balancedness(a.len(), a.num_partitions()),
            exact_ncut: exact_ncut(g, a)?,
            expected_ncut: expected_ncut_value(&lg, y, LossPath::Sparse)?,
            balance_error: balance_error_value(y)?,
            partition_sizes: a.sizes(),
            wall_clock_ms,
        })
    }
}

/// `(degree, node count)` pairs in ascending degree order. Degrees are
/// weighted sums, so weighted graphs may have fractional degrees.
pub fn degree_histogram(g: &Graph) -> Vec<(f64, usize)> {
    let mut d = g.degree_vector().0;
    d.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, usize)> = Vec::new();
    for v in d {
        match out.last_mut() {
            Some((x, c)) if *x == v => *c += 1,
            _ => out.push((v, 1)),
        }
    }
    out
}

pub fn degree_histogram_csv(g: &Graph) -> String {
    let mut s = String::from("degree,count\n");
    for (d, c) in degree_histogram(g) {
        s.push_str(&format!("{d},{c}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::clique_chain;

    fn c4() -> Graph {
        Graph::unweighted(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap()
    }

    fn a(parts: &[usize], g: usize) -> HardAssignment {
        HardAssignment::new(parts.to_vec(), g).unwrap()
    }

    #[test]
    fn edge_cut_examples() {
        assert_eq!(edge_cut_ratio(&c4(), &a(&[0, 0, 1, 1], 2)).unwrap(), 0.5);
        assert_eq!(edge_cut_ratio(&c4(), &a(&[0, 0, 0, 0], 2)).unwrap(), 0.0);
        let tt = clique_chain(&[3, 3]).unwrap();
        assert_eq!(edge_cut_ratio(&tt, &a(&[0, 0, 0, 1, 1, 1], 2)).unwrap(), 1.0 / 7.0);
        let empty = Graph::new(3, []).unwrap();
        assert_eq!(edge_cut_ratio(&empty, &a(&[0, 1, 0], 2)).unwrap(), 0.0);
    }

    #[test]
    fn balancedness_examples() {
        assert_eq!(balancedness(&a(&[0, 1, 0, 1], 2)), 1.0);
        assert_eq!(balancedness(&a(&[0, 0, 0, 0], 2)), 0.75);
        let b = balancedness(&a(&[0, 0, 1], 2));
        assert!((b - (1.0 - (2.0 / 36.0) / 2.0)).abs() < 1e-15);
        assert_eq!(b, best_balancedness(3, 2));
        assert_eq!(best_balancedness(300, 3), 1.0);
    }

    #[test]
    fn report_on_c4() {
        let r = MetricsReport::compute(&c4(), &a(&[0, 0, 0, 0], 2), None, 1.5).unwrap();
        assert_eq!(r.edge_cut_ratio, 0.0);
        assert_eq!(r.balancedness, 0.75);
        assert_eq!(r.partition_sizes, vec![4, 0]);
        assert_eq!(r.balance_error, 8.0);
        assert_eq!(r.wall_clock_ms, 1.5);
        let r = MetricsReport::compute(&c4(), &a(&[0, 0, 1, 1], 2), None, 0.0).unwrap();
        assert!((r.exact_ncut - r.expected_ncut).abs() < 1e-12);
    }

    #[test]
    fn histogram() {
        let g = Graph::unweighted(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        assert_eq!(degree_histogram(&g), vec![(1.0, 3), (3.0, 1)]);
        assert_eq!(degree_histogram_csv(&g), "degree,count\n1,3\n3,1\n");
    }
}
