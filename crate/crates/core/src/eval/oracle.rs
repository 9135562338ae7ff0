use serde::{Deserialize, Serialize};

use crate::error::{GapError, Result};
use crate::graph::Graph;
use crate::loss::HardAssignment;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub assignment: HardAssignment,
    pub ncut: f64,
    /// Number of canonical assignments scored.
    pub enumerated: u64,
}

/// Largest node count the oracle accepts for `g` partitions.
pub fn oracle_size_limit(parts: usize) -> usize {
    match parts {
        2 => 16,
        3 => 10,
        _ => 8,
    }
}

/// Minimum Ncut over all assignments that use every one of the `parts`
/// partitions. Label permutations are skipped by enumerating only
/// first-occurrence canonical labelings. With `require_balanced`, only
/// assignments whose partition sizes differ by at most one are scored.
/// Ties keep the lexicographically first canonical labeling.
pub fn brute_force_min_ncut(g: &Graph, parts: usize, require_balanced: bool) -> Result<OracleResult> {
    let n = g.num_nodes();
    if parts < 2 || parts > n {
        return Err(GapError::InvalidArgument(format!(
            "oracle needs 2 <= g <= n (g = {parts}, n = {n})"
        )));
    }
    let limit = oracle_size_limit(parts);
    if n > limit {
        return Err(GapError::TooLarge(format!(
            "oracle enumeration for g = {parts} is limited to n <= {limit}, got n = {n}"
        )));
    }
    let mut search = Search {
        g,
        parts,
        require_balanced,
        labels: vec![0; n],
        sizes: vec![0; parts],
        best: None,
        enumerated: 0,
    };
    search.recurse(0, 0);
    let (labels, ncut) = search
        .best
        .ok_or_else(|| GapError::InvalidArgument("no admissible assignment".into()))?;
    Ok(OracleResult {
        assignment: HardAssignment::new(labels, parts)?,
        ncut,
        enumerated: search.enumerated,
    })
}

struct Search<'a> {
    g: &'a Graph,
    parts: usize,
    require_balanced: bool,
    labels: Vec<usize>,
    sizes: Vec<usize>,
    best: Option<(Vec<usize>, f64)>,
    enumerated: u64,
}

impl Search<'_> {
    fn recurse(&mut self, i: usize, used: usize) {
        let n = self.labels.len();
        // the remaining nodes must be able to open every unused label
        if self.parts - used > n - i {
            return;
        }
        if self.require_balanced {
            let cap = n.div_ceil(self.parts);
            if self.sizes.iter().any(|&s| s > cap) {
                return;
            }
        }
        if i == n {
            self.score();
            return;
        }
        for k in 0..(used + 1).min(self.parts) {
            self.labels[i] = k;
            self.sizes[k] += 1;
            self.recurse(i + 1, used.max(k + 1));
            self.sizes[k] -= 1;
        }
    }

    fn score(&mut self) {
        if self.require_balanced {
            let lo = self.sizes.iter().min().unwrap();
            let hi = self.sizes.iter().max().unwrap();
            if hi - lo > 1 {
                return;
            }
        }
        self.enumerated += 1;
        let mut cut = vec![0.0; self.parts];
        let mut vol = vec![0.0; self.parts];
        for e in self.g.edges() {
            let (a, b) = (self.labels[e.u], self.labels[e.v]);
            vol[a] += e.w;
            vol[b] += e.w;
            if a != b {
                cut[a] += e.w;
                cut[b] += e.w;
            }
        }
        let ncut: f64 = cut
            .iter()
            .zip(&vol)
            .map(|(&c, &v)| if v > 0.0 { c / v } else { 0.0 })
            .sum();
        if self.best.as_ref().is_none_or(|(_, b)| ncut < *b) {
            self.best = Some((self.labels.clone(), ncut));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::clique_chain;
    use crate::loss::exact_ncut;

    #[test]
    fn two_triangles() {
        let g = clique_chain(&[3, 3]).unwrap();
        let r = brute_force_min_ncut(&g, 2, false).unwrap();
        assert!((r.ncut - 2.0 / 7.0).abs() < 1e-15);
        assert_eq!(r.assignment.parts(), &[0, 0, 0, 1, 1, 1]);
        // 2^5 labelings with node 0 fixed, minus the all-zero one
        assert_eq!(r.enumerated, 31);
    }

    #[test]
    fn path_balanced() {
        let g = Graph::unweighted(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let r = brute_force_min_ncut(&g, 2, true).unwrap();
        assert!((r.ncut - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.assignment.parts(), &[0, 0, 1, 1]);
        assert_eq!(r.enumerated, 3);
    }

    #[test]
    fn k4_balanced() {
        let g = clique_chain(&[4]).unwrap();
        let r = brute_force_min_ncut(&g, 2, true).unwrap();
        assert!((r.ncut - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn stirling_counts_and_optimality() {
        let g = crate::graph::erdos_renyi(7, 0.5, 3).unwrap();
        let r = brute_force_min_ncut(&g, 3, false).unwrap();
        // S(7, 3) = 301
        assert_eq!(r.enumerated, 301);
        assert_eq!(exact_ncut(&g, &r.assignment).unwrap(), r.ncut);
    }

    #[test]
    fn size_guard() {
        let g = Graph::new(11, []).unwrap();
        assert!(matches!(brute_force_min_ncut(&g, 3, false), Err(GapError::TooLarge(_))));
        assert!(brute_force_min_ncut(&Graph::new(17, []).unwrap(), 2, false).is_err());
        assert!(brute_force_min_ncut(&Graph::new(3, []).unwrap(), 4, false).is_err());
    }
}
