//! Cut objectives.
//!
//! Discrete quantities on a [`HardAssignment`]: `cut(S_k)` is the total
//! weight of edges with exactly one endpoint in `S_k`, `vol(S_k)` the sum of
//! degrees in `S_k`, and `Ncut = Σ_k cut(S_k) / vol(S_k)`.
//!
//! Their relaxation over row-stochastic `Y` (n x g), where `Y_ik` is the
//! probability node `i` lands in partition `k`:
//!
//! - expected cut of `k`: `Σ_ij A_ij Y_ik (1 - Y_jk)`. The sum runs over
//!   ordered pairs of the symmetric `A`, but a boundary edge only contributes
//!   in the direction leaving `S_k`, so for one-hot `Y` this equals the exact
//!   cut (no factor of two).
//! - expected volumes: `Γ = Yᵀ D`.
//! - expected Ncut: `Σ (Y ⊘ Γ̃)(1 - Y)ᵀ ⊙ A` with `Γ̃ = max(Γ, 1e-10)`.
//! - balance error: `Σ_k (Σ_i Y_ik - n/g)²`.
//!
//! Each expected quantity has a dense path that materializes the `n x n`
//! products, and a sparse path that only touches edges:
//! `Σ (Y ⊘ Γ̃) ⊙ A (1 - Y)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{GapError, Result};
use crate::graph::Graph;
use crate::numeric::{Matrix, SparseMatrix, Tape, Var};

/// Floor applied to expected volumes before dividing.
pub const EPS_VOL: f64 = 1e-10;

/// Partition id per node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardAssignment {
    parts: Vec<usize>,
    num_partitions: usize,
}

impl HardAssignment {
    pub fn new(parts: Vec<usize>, num_partitions: usize) -> Result<Self> {
        if let Some(&bad) = parts.iter().find(|&&p| p >= num_partitions) {
            return Err(GapError::InvalidArgument(format!(
                "partition id {bad} outside 0..{num_partitions}"
            )));
        }
        Ok(HardAssignment {
            parts,
            num_partitions,
        })
    }

    /// Row-wise argmax; ties go to the lowest partition id.
    pub fn from_probabilities(y: &Matrix) -> Self {
        let parts = (0..y.rows())
            .map(|r| {
                let row = y.row(r);
                (0..row.len()).fold(0, |b, c| if row[c] > row[b] { c } else { b })
            })
            .collect();
        HardAssignment {
            parts,
            num_partitions: y.cols(),
        }
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    pub fn num_partitions(&self) -> usize {
        self.num_partitions
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.num_partitions];
        for &p in &self.parts {
            s[p] += 1;
        }
        s
    }

    pub fn one_hot(&self) -> Matrix {
        let mut y = Matrix::zeros(self.parts.len(), self.num_partitions);
        for (i, &p) in self.parts.iter().enumerate() {
            y.set(i, p, 1.0);
        }
        y
    }

    fn check(&self, g: &Graph) -> Result<()> {
        if self.parts.len() != g.num_nodes() {
            return Err(GapError::InvalidArgument(format!(
                "assignment covers {} nodes, graph has {}",
                self.parts.len(),
                g.num_nodes()
            )));
        }
        Ok(())
    }
}

/// Row-stochastic `n x g` matrix of partition probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionProbabilities(Matrix);

impl PartitionProbabilities {
    pub fn new(y: Matrix) -> Result<Self> {
        for r in 0..y.rows() {
            let row = y.row(r);
            if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(GapError::InvalidArgument(format!("row {r} has entries outside [0, 1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(GapError::InvalidArgument(format!("row {r} sums to {s}")));
            }
        }
        Ok(PartitionProbabilities(y))
    }

    pub fn uniform(n: usize, g: usize) -> Self {
        PartitionProbabilities(Matrix::filled(n, g, 1.0 / g as f64))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn argmax(&self) -> HardAssignment {
        HardAssignment::from_probabilities(&self.0)
    }
}

/// Exact cut of partition `k`: weight of edges with exactly one endpoint in
/// `S_k`.
pub fn exact_cut(g: &Graph, a: &HardAssignment, k: usize) -> Result<f64> {
    a.check(g)?;
    let p = a.parts();
    Ok(g.edges()
        .iter()
        .filter(|e| (p[e.u] == k) != (p[e.v] == k))
        .map(|e| e.w)
        .sum())
}

/// Total weight of edges whose endpoints lie in different partitions; each
/// edge counted once.
pub fn exact_total_cut(g: &Graph, a: &HardAssignment) -> Result<f64> {
    a.check(g)?;
    let p = a.parts();
    Ok(g.edges().iter().filter(|e| p[e.u] != p[e.v]).map(|e| e.w).sum())
}

/// `Σ_k cut(S_k) / vol(S_k)`; partitions with zero volume contribute 0.
pub fn exact_ncut(g: &Graph, a: &HardAssignment) -> Result<f64> {
    a.check(g)?;
    let k = a.num_partitions();
    let p = a.parts();
    let mut cut = vec![0.0; k];
    let mut vol = vec![0.0; k];
    for e in g.edges() {
        vol[p[e.u]] += e.w;
        vol[p[e.v]] += e.w;
        if p[e.u] != p[e.v] {
            cut[p[e.u]] += e.w;
            cut[p[e.v]] += e.w;
        }
    }
    Ok(cut
        .iter()
        .zip(&vol)
        .map(|(&c, &v)| if v > 0.0 { c / v } else { 0.0 })
        .sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LossPath {
    Dense,
    #[default]
    Sparse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BalanceMode {
    /// Squared deviation of expected partition sizes, in node counts.
    #[default]
    Raw,
    /// Same, divided by `(n/g)²`.
    Normalized,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    pub lambda_balance: f64,
    pub balance_mode: BalanceMode,
    pub path: LossPath,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            lambda_balance: 1.0,
            balance_mode: BalanceMode::Raw,
            path: LossPath::Sparse,
        }
    }
}

/// Graph data the loss needs, prepared once per graph.
#[derive(Clone, Debug)]
pub struct LossGraph {
    adjacency: Arc<SparseMatrix>,
    degrees: Matrix,
    dense: Option<Arc<Matrix>>,
}

impl LossGraph {
    pub fn new(g: &Graph) -> Self {
        LossGraph {
            adjacency: Arc::new(g.adjacency()),
            degrees: g.degree_vector().to_row(),
            dense: None,
        }
    }

    /// Also materializes the dense adjacency for [`LossPath::Dense`].
    pub fn with_dense(mut self) -> Self {
        self.dense = Some(Arc::new(self.adjacency.to_dense()));
        self
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn adjacency(&self) -> &Arc<SparseMatrix> {
        &self.adjacency
    }

    fn dense(&self) -> Matrix {
        match &self.dense {
            Some(d) => (**d).clone(),
            None => self.adjacency.to_dense(),
        }
    }

    fn check(&self, tape: &Tape, y: Var) -> Result<()> {
        let rows = tape.value(y).rows();
        if rows != self.num_nodes() {
            return Err(GapError::shape(
                "gap_loss",
                format!("Y has {rows} rows for {} nodes", self.num_nodes()),
            ));
        }
        Ok(())
    }
}

/// Expected cut of partition `k` summed over ordered node pairs.
pub fn expected_cut(tape: &mut Tape, lg: &LossGraph, y: Var, k: usize, path: LossPath) -> Result<Var> {
    lg.check(tape, y)?;
    let yk = tape.select_column(y, k)?;
    let not_yk = tape.one_minus(yk)?;
    match path {
        LossPath::Sparse => {
            let a_not = tape.sparse_matmul(&lg.adjacency, not_yk)?;
            let prod = tape.mul(yk, a_not)?;
            tape.reduce_sum(prod)
        }
        LossPath::Dense => {
            let not_t = tape.transpose(not_yk)?;
            let outer = tape.matmul(yk, not_t)?;
            let a = tape.constant(lg.dense())?;
            let masked = tape.mul(outer, a)?;
            tape.reduce_sum(masked)
        }
    }
}

/// Sum of expected cuts over all partitions.
pub fn expected_total_cut(tape: &mut Tape, lg: &LossGraph, y: Var, path: LossPath) -> Result<Var> {
    let g = tape.value(y).cols();
    let mut total = expected_cut(tape, lg, y, 0, path)?;
    for k in 1..g {
        let c = expected_cut(tape, lg, y, k, path)?;
        total = tape.add(total, c)?;
    }
    Ok(total)
}

/// `Γ = Yᵀ D` as a `1 x g` row.
pub fn volumes(tape: &mut Tape, lg: &LossGraph, y: Var) -> Result<Var> {
    lg.check(tape, y)?;
    let d = tape.constant(lg.degrees.clone())?;
    tape.matmul(d, y)
}

pub fn expected_ncut(tape: &mut Tape, lg: &LossGraph, y: Var, path: LossPath) -> Result<Var> {
    let gamma = volumes(tape, lg, y)?;
    let gamma = tape.clamp_min(gamma, EPS_VOL)?;
    let scaled = tape.div(y, gamma)?;
    let not_y = tape.one_minus(y)?;
    match path {
        LossPath::Sparse => {
            let a_not = tape.sparse_matmul(&lg.adjacency, not_y)?;
            let prod = tape.mul(scaled, a_not)?;
            tape.reduce_sum(prod)
        }
        LossPath::Dense => {
            let not_t = tape.transpose(not_y)?;
            let outer = tape.matmul(scaled, not_t)?;
            let a = tape.constant(lg.dense())?;
            let masked = tape.mul(outer, a)?;
            tape.reduce_sum(masked)
        }
    }
}

/// `Σ_k (Σ_i Y_ik − n/g)²` with `n` the number of rows of `y`.
pub fn balance_error(tape: &mut Tape, y: Var, num_partitions: usize) -> Result<Var> {
    let (n, g) = tape.value(y).shape();
    if g != num_partitions {
        return Err(GapError::shape(
            "balance_error",
            format!("Y has {g} columns for {num_partitions} partitions"),
        ));
    }
    let ones = tape.constant(Matrix::filled(1, n, 1.0))?;
    let sizes = tape.matmul(ones, y)?;
    let dev = tape.affine(sizes, 1.0, -(n as f64) / g as f64)?;
    let sq = tape.square(dev)?;
    tape.reduce_sum(sq)
}

/// Handles to the loss terms recorded on a tape.
#[derive(Clone, Copy, Debug)]
pub struct LossTerms {
    pub total: Var,
    pub expected_ncut: Var,
    pub balance_error: Var,
}

/// `expected_ncut + λ · balance_error`, with the balance term optionally
/// divided by `(n/g)²`. The reported `balance_error` is always the raw value.
pub fn gap_loss(tape: &mut Tape, lg: &LossGraph, y: Var, num_partitions: usize, cfg: &LossConfig) -> Result<LossTerms> {
    if !(cfg.lambda_balance >= 0.0) {
        return Err(GapError::InvalidArgument(format!(
            "lambda_balance must be non-negative, got {}",
            cfg.lambda_balance
        )));
    }
    let ncut = expected_ncut(tape, lg, y, cfg.path)?;
    let bal = balance_error(tape, y, num_partitions)?;
    let n = tape.value(y).rows() as f64;
    let weight = match cfg.balance_mode {
        BalanceMode::Raw => cfg.lambda_balance,
        BalanceMode::Normalized => {
            let target = n / num_partitions as f64;
            cfg.lambda_balance / (target * target).max(f64::MIN_POSITIVE)
        }
    };
    let weighted = tape.scale(bal, weight)?;
    let total = tape.add(ncut, weighted)?;
    Ok(LossTerms {
        total,
        expected_ncut: ncut,
        balance_error: bal,
    })
}

/// Scalar loss values for a fixed `Y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossValues {
    pub total: f64,
    pub expected_ncut: f64,
    pub balance_error: f64,
}

pub fn evaluate_loss(lg: &LossGraph, y: &Matrix, cfg: &LossConfig) -> Result<LossValues> {
    let mut tape = Tape::new();
    let yv = tape.constant(y.clone())?;
    let terms = gap_loss(&mut tape, lg, yv, y.cols(), cfg)?;
    Ok(LossValues {
        total: tape.scalar(terms.total),
        expected_ncut: tape.scalar(terms.expected_ncut),
        balance_error: tape.scalar(terms.balance_error),
    })
}

pub fn expected_ncut_value(lg: &LossGraph, y: &Matrix, path: LossPath) -> Result<f64> {
    let mut tape = Tape::new();
    let yv = tape.constant(y.clone())?;
    let v = expected_ncut(&mut tape, lg, yv, path)?;
    Ok(tape.scalar(v))
}

pub fn expected_cut_value(lg: &LossGraph, y: &Matrix, k: usize, path: LossPath) -> Result<f64> {
    let mut tape = Tape::new();
    let yv = tape.constant(y.clone())?;
    let v = expected_cut(&mut tape, lg, yv, k, path)?;
    Ok(tape.scalar(v))
}

pub fn volumes_value(lg: &LossGraph, y: &Matrix) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let yv = tape.constant(y.clone())?;
    let v = volumes(&mut tape, lg, yv)?;
    Ok(tape.value(v).data().to_vec())
}

pub fn balance_error_value(y: &Matrix) -> Result<f64> {
    let mut tape = Tape::new();
    let yv = tape.constant(y.clone())?;
    let v = balance_error(&mut tape, yv, y.cols())?;
    Ok(tape.scalar(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::clique_chain;
    use crate::numeric::{finite_difference_check, ParamStore};

    fn c4() -> Graph {
        Graph::unweighted(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap()
    }

    fn p4() -> Graph {
        Graph::unweighted(4, &[(0, 1), (1, 2), (2, 3)]).unwrap()
    }

    fn split(parts: &[usize], g: usize) -> HardAssignment {
        HardAssignment::new(parts.to_vec(), g).unwrap()
    }

    #[test]
    fn exact_cut_examples() {
        assert_eq!(exact_cut(&c4(), &split(&[0, 0, 1, 1], 2), 0).unwrap(), 2.0);
        assert_eq!(exact_cut(&c4(), &split(&[0, 0, 0, 0], 2), 0).unwrap(), 0.0);
        assert_eq!(exact_cut(&p4(), &split(&[0, 0, 1, 1], 2), 1).unwrap(), 1.0);
    }

    #[test]
    fn exact_ncut_examples() {
        assert_eq!(exact_ncut(&c4(), &split(&[0, 0, 1, 1], 2)).unwrap(), 1.0);
        let v = exact_ncut(&p4(), &split(&[0, 0, 1, 1], 2)).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
        let tt = clique_chain(&[3, 3]).unwrap();
        let v = exact_ncut(&tt, &split(&[0, 0, 0, 1, 1, 1], 2)).unwrap();
        assert!((v - 2.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn expected_cut_one_hot_equals_exact_cut() {
        let g = c4();
        let a = split(&[0, 0, 1, 1], 2);
        let lg = LossGraph::new(&g);
        for path in [LossPath::Sparse, LossPath::Dense] {
            for k in 0..2 {
                let v = expected_cut_value(&lg, &a.one_hot(), k, path).unwrap();
                assert_eq!(v, exact_cut(&g, &a, k).unwrap());
            }
        }
    }

    #[test]
    fn expected_cut_uniform_closed_form() {
        let g = clique_chain(&[4, 3, 2]).unwrap();
        let lg = LossGraph::new(&g);
        for parts in 2..5 {
            let y = PartitionProbabilities::uniform(g.num_nodes(), parts).into_matrix();
            let gf = parts as f64;
            let expect = 2.0 * g.num_edges() as f64 * (1.0 / gf) * (1.0 - 1.0 / gf);
            let v = expected_cut_value(&lg, &y, 0, LossPath::Sparse).unwrap();
            assert!((v - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn volume_examples() {
        let lg = LossGraph::new(&c4());
        let one_hot = split(&[0, 0, 1, 1], 2).one_hot();
        assert_eq!(volumes_value(&lg, &one_hot).unwrap(), vec![4.0, 4.0]);
        let uni = PartitionProbabilities::uniform(4, 2).into_matrix();
        assert_eq!(volumes_value(&lg, &uni).unwrap(), vec![4.0, 4.0]);
        let skew = Matrix::from_rows(&[vec![0.9, 0.1], vec![0.3, 0.7], vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap();
        let v = volumes_value(&lg, &skew).unwrap();
        assert!((v.iter().sum::<f64>() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn expected_ncut_examples() {
        let g = c4();
        let lg = LossGraph::new(&g);
        for parts in 2..6 {
            let y = PartitionProbabilities::uniform(4, parts.min(4)).into_matrix();
            let v = expected_ncut_value(&lg, &y, LossPath::Sparse).unwrap();
            assert!((v - (parts.min(4) as f64 - 1.0)).abs() < 1e-12);
        }
        let a = split(&[0, 0, 1, 1], 2);
        let v = expected_ncut_value(&lg, &a.one_hot(), LossPath::Dense).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_partition_is_guarded() {
        let lg = LossGraph::new(&c4());
        let y = split(&[0, 0, 0, 0], 3).one_hot();
        let v = expected_ncut_value(&lg, &y, LossPath::Sparse).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn balance_examples() {
        assert_eq!(balance_error_value(&split(&[0, 1, 0, 1], 2).one_hot()).unwrap(), 0.0);
        assert_eq!(balance_error_value(&split(&[0, 0, 0, 0], 2).one_hot()).unwrap(), 8.0);
        for (n, g) in [(4, 2), (7, 3), (10, 4)] {
            let y = PartitionProbabilities::uniform(n, g).into_matrix();
            assert!(balance_error_value(&y).unwrap().abs() < 1e-20);
        }
    }

    #[test]
    fn gap_loss_examples() {
        let g = clique_chain(&[3, 3]).unwrap();
        let lg = LossGraph::new(&g);
        let uni = PartitionProbabilities::uniform(6, 2).into_matrix();
        let v = evaluate_loss(&lg, &uni, &LossConfig::default()).unwrap();
        assert!((v.total - 1.0).abs() < 1e-12);
        let best = split(&[0, 0, 0, 1, 1, 1], 2).one_hot();
        let v = evaluate_loss(&lg, &best, &LossConfig::default()).unwrap();
        assert!((v.total - 2.0 / 7.0).abs() < 1e-12);
        let skew = split(&[0, 0, 0, 0, 1, 1], 2).one_hot();
        let no_bal = LossConfig { lambda_balance: 0.0, ..LossConfig::default() };
        let v = evaluate_loss(&lg, &skew, &no_bal).unwrap();
        assert_eq!(v.total, expected_ncut_value(&lg, &skew, LossPath::Sparse).unwrap());
        let bad = LossConfig { lambda_balance: -1.0, ..LossConfig::default() };
        assert!(evaluate_loss(&lg, &skew, &bad).is_err());
    }

    #[test]
    fn normalized_balance_divides_by_target_squared() {
        let g = c4();
        let lg = LossGraph::new(&g);
        let y = split(&[0, 0, 0, 0], 2).one_hot();
        let raw = evaluate_loss(&lg, &y, &LossConfig::default()).unwrap();
        let norm = evaluate_loss(&lg, &y, &LossConfig { balance_mode: BalanceMode::Normalized, ..LossConfig::default() }).unwrap();
        assert_eq!(raw.balance_error, norm.balance_error);
        assert!((norm.total - (raw.expected_ncut + 8.0 / 4.0)).abs() < 1e-12);
    }

    #[test]
    fn gradient_wrt_logits_matches_finite_differences() {
        let g = clique_chain(&[3, 2, 3]).unwrap();
        let lg = LossGraph::new(&g);
        let mut store = ParamStore::new();
        let logits = store.add("logits", crate::numeric::xavier_init(8, 3, 4).scaled(3.0), true);
        for path in [LossPath::Sparse, LossPath::Dense] {
            let cfg = LossConfig { path, ..LossConfig::default() };
            let err = finite_difference_check(&mut store, logits, 1e-5, |s, t| {
                let z = t.param(s, logits)?;
                let y = t.row_softmax(z)?;
                Ok(gap_loss(t, &lg, y, 3, &cfg)?.total)
            })
            .unwrap();
            assert!(err < 1e-4, "{path:?}: {err}");
        }
    }

    #[test]
    fn argmax_ties_go_low() {
        let y = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.2, 0.8], vec![1.0 / 3.0; 3][..2].to_vec()]).unwrap();
        assert_eq!(HardAssignment::from_probabilities(&y).parts(), &[0, 1, 0]);
    }
}
