use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{GapError, Result};
use crate::numeric::{symmetric_eigs_with, EigenOptions, LinearOperator, Matrix, SparseMatrix, Which};

/// Reserved column for op types outside a fixed vocabulary.
pub const UNKNOWN_OP: &str = "<unk>";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum UnknownOpPolicy {
    #[default]
    Error,
    MapToUnk,
}

/// Ordered list of categorical feature names; position = feature column.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    names: Vec<String>,
}

impl Vocabulary {
    pub fn new(names: Vec<String>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for n in &names {
            if n.is_empty() || n.contains('\n') {
                return Err(GapError::InvalidArgument(format!("bad vocabulary entry {n:?}")));
            }
            if !seen.insert(n) {
                return Err(GapError::InvalidArgument(format!("duplicate vocabulary entry `{n}`")));
            }
        }
        Ok(Vocabulary { names })
    }

    /// Sorted distinct op types.
    pub fn from_ops<'a>(ops: impl IntoIterator<Item = &'a str>) -> Self {
        let set: BTreeSet<&str> = ops.into_iter().collect();
        Vocabulary {
            names: set.into_iter().map(str::to_string).collect(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Copy of this vocabulary with the reserved unknown column appended if
    /// it is not already present.
    pub fn with_unknown(&self) -> Vocabulary {
        let mut v = self.clone();
        if v.index(UNKNOWN_OP).is_none() {
            v.names.push(UNKNOWN_OP.to_string());
        }
        v
    }

    /// One name per line.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GapError::io(path, e))?;
        Vocabulary::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect(),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = self.names.join("\n");
        s.push('\n');
        super::atomic_write(path, s.as_bytes())
    }

    pub fn jaccard(&self, other: &Vocabulary) -> f64 {
        let a: BTreeSet<&String> = self.names.iter().collect();
        let b: BTreeSet<&String> = other.names.iter().collect();
        let union = a.union(&b).count();
        if union == 0 {
            return 1.0;
        }
        a.intersection(&b).count() as f64 / union as f64
    }
}

/// One-hot encodes categorical values against `vocab`.
///
/// With [`UnknownOpPolicy::MapToUnk`] the returned column names are
/// `vocab.with_unknown()`.
pub fn one_hot_features(
    ops: &[String],
    vocab: &Vocabulary,
    policy: UnknownOpPolicy,
) -> Result<(Matrix, Vec<String>)> {
    let vocab = match policy {
        UnknownOpPolicy::Error => vocab.clone(),
        UnknownOpPolicy::MapToUnk => vocab.with_unknown(),
    };
    let lookup: HashMap<&str, usize> = vocab
        .names()
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let mut x = Matrix::zeros(ops.len(), vocab.len());
    let mut missing = BTreeSet::new();
    for (i, op) in ops.iter().enumerate() {
        match lookup.get(op.as_str()) {
            Some(&c) => x.set(i, c, 1.0),
            None => match policy {
                UnknownOpPolicy::Error => {
                    missing.insert(op.clone());
                }
                UnknownOpPolicy::MapToUnk => x.set(i, lookup[UNKNOWN_OP], 1.0),
            },
        }
    }
    if !missing.is_empty() {
        let missing: Vec<String> = missing.into_iter().collect();
        return Err(GapError::FeatureMismatch {
            message: format!("op types not in vocabulary: {}", missing.join(", ")),
            missing,
        });
    }
    Ok((x, vocab.names().to_vec()))
}

/// One-hot node-index features, zero-padded to `width` columns.
pub fn node_index_features(n: usize, width: usize) -> Result<Matrix> {
    if n > width {
        return Err(GapError::FeatureMismatch {
            message: format!("graph has {n} nodes but node-index features are {width} wide"),
            missing: Vec::new(),
        });
    }
    let mut x = Matrix::zeros(n, width);
    for i in 0..n {
        x.set(i, i, 1.0);
    }
    Ok(x)
}

/// Covariance of the mean-centered adjacency rows, applied matrix-free:
/// `C v = (A (A v) - n μ (μᵀ v)) / n` with `μ` the column means of `A`.
struct CenteredCovariance<'a> {
    adj: &'a SparseMatrix,
    mean: Vec<f64>,
    trace: f64,
}

impl<'a> CenteredCovariance<'a> {
    fn new(adj: &'a SparseMatrix) -> Self {
        let n = adj.rows() as f64;
        let mut mean = vec![0.0; adj.rows()];
        let mut sq = 0.0;
        for (_, c, v) in adj.nonzeros() {
            mean[c] += v / n;
            sq += v * v;
        }
        let mu2: f64 = mean.iter().map(|m| m * m).sum();
        let trace = ((sq - n * mu2) / n).max(0.0);
        CenteredCovariance { adj, mean, trace }
    }
}

impl LinearOperator for CenteredCovariance<'_> {
    fn dim(&self) -> usize {
        self.adj.rows()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.adj.rows() as f64;
        let ax = self.adj.matvec(x);
        let mut y = self.adj.matvec(&ax);
        let mu_x: f64 = self.mean.iter().zip(x).map(|(m, v)| m * v).sum();
        for (yi, mi) in y.iter_mut().zip(&self.mean) {
            *yi = (*yi - n * mi * mu_x) / n;
        }
        y
    }

    // The operator is PSD, so its trace bounds the Frobenius norm.
    fn norm_scale(&self) -> f64 {
        self.trace
    }
}

/// Principal-component features of the adjacency rows.
///
/// Rows of `A` are mean-centered and projected on the top `min(dim, n)`
/// principal directions; the result is zero-padded to exactly `dim` columns.
pub fn pca_features(g: &Graph, dim: usize) -> Result<Matrix> {
    if dim == 0 {
        return Err(GapError::InvalidArgument("PCA width must be at least 1".into()));
    }
    let n = g.num_nodes();
    let mut out = Matrix::zeros(n, dim);
    if n == 0 || g.num_edges() == 0 {
        return Ok(out);
    }
    let adj = g.adjacency();
    let cov = CenteredCovariance::new(&adj);
    let k = dim.min(n);
    let pairs = symmetric_eigs_with(
        &cov,
        k,
        Which::Largest,
        EigenOptions {
            seed: 0x5eed,
            ..EigenOptions::default()
        },
    )?;
    // largest variance first
    let mut vectors: Vec<&[f64]> = pairs.iter().rev().map(|p| p.vector.as_slice()).collect();
    vectors.truncate(k);
    for (c, v) in vectors.iter().enumerate() {
        let av = adj.matvec(v);
        let mu_v: f64 = cov.mean.iter().zip(v.iter()).map(|(m, x)| m * x).sum();
        for (r, a) in av.iter().enumerate() {
            let value = a - mu_v;
            // clean rounding noise from directions with no variance
            out.set(r, c, if value.abs() < 1e-13 { 0.0 } else { value });
        }
    }
    Ok(out)
}

/// How node features are obtained for a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FeatureSpec {
    /// One-hot op types over a fixed vocabulary.
    OneHot {
        vocabulary: Vocabulary,
        #[serde(default)]
        unknown: UnknownOpPolicy,
    },
    /// Principal components of the adjacency rows, padded to `dim`.
    Pca { dim: usize },
    /// One-hot node index, padded to `width`.
    NodeIndex { width: usize },
    /// Column-wise concatenation of other specs, in order.
    Concat { parts: Vec<FeatureSpec> },
}

impl FeatureSpec {
    /// Width of the feature matrices this spec produces.
    pub fn width(&self) -> usize {
        match self {
            FeatureSpec::OneHot { vocabulary, unknown } => match unknown {
                UnknownOpPolicy::Error => vocabulary.len(),
                UnknownOpPolicy::MapToUnk => vocabulary.with_unknown().len(),
            },
            FeatureSpec::Pca { dim } => *dim,
            FeatureSpec::NodeIndex { width } => *width,
            FeatureSpec::Concat { parts } => parts.iter().map(FeatureSpec::width).sum(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            FeatureSpec::OneHot { vocabulary, .. } => format!("one-hot({})", vocabulary.len()),
            FeatureSpec::Pca { dim } => format!("pca({dim})"),
            FeatureSpec::NodeIndex { width } => format!("node-index({width})"),
            FeatureSpec::Concat { parts } => {
                let labels: Vec<String> = parts.iter().map(FeatureSpec::label).collect();
                labels.join("+")
            }
        }
    }
}

/// Node features for `g` as required by `spec`.
///
/// One-hot specs re-encode the graph's named feature columns into the spec's
/// vocabulary; any column name the vocabulary lacks is reported (or mapped
/// to the unknown column).
pub fn build_features(g: &Graph, spec: &FeatureSpec) -> Result<Matrix> {
    match spec {
        FeatureSpec::Pca { dim } => pca_features(g, *dim),
        FeatureSpec::NodeIndex { width } => node_index_features(g.num_nodes(), *width),
        FeatureSpec::Concat { parts } => {
            let blocks = parts.iter().map(|p| build_features(g, p)).collect::<Result<Vec<_>>>()?;
            let width: usize = blocks.iter().map(Matrix::cols).sum();
            let mut out = Matrix::zeros(g.num_nodes(), width);
            for r in 0..g.num_nodes() {
                let mut c0 = 0;
                for b in &blocks {
                    out.row_mut(r)[c0..c0 + b.cols()].copy_from_slice(b.row(r));
                    c0 += b.cols();
                }
            }
            Ok(out)
        }
        FeatureSpec::OneHot { vocabulary, unknown } => {
            let (Some(x), Some(names)) = (g.node_features(), g.feature_names()) else {
                return Err(GapError::FeatureMismatch {
                    message: "model expects named categorical node features; graph has none".into(),
                    missing: Vec::new(),
                });
            };
            if names == vocabulary.names() && *unknown == UnknownOpPolicy::Error {
                return Ok(x.clone());
            }
            let ops: Vec<String> = (0..g.num_nodes())
                .map(|i| {
                    let row = x.row(i);
                    let best = (0..row.len()).fold(0, |b, c| if row[c] > row[b] { c } else { b });
                    names.get(best).cloned().unwrap_or_default()
                })
                .collect();
            one_hot_features(&ops, vocabulary, *unknown).map(|(m, _)| m)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c4() -> Graph {
        Graph::unweighted(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap()
    }

    #[test]
    fn concat_stacks_columns() {
        let g = c4();
        let spec = FeatureSpec::Concat {
            parts: vec![FeatureSpec::NodeIndex { width: 5 }, FeatureSpec::Pca { dim: 2 }],
        };
        assert_eq!(spec.width(), 7);
        let x = build_features(&g, &spec).unwrap();
        let pca = pca_features(&g, 2).unwrap();
        for r in 0..4 {
            assert_eq!(x.row(r)[r], 1.0);
            assert_eq!(&x.row(r)[5..], pca.row(r));
        }
        let back: FeatureSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn pca_shape_and_padding() {
        let g = c4();
        for dim in [1, 2, 4, 9] {
            let x = pca_features(&g, dim).unwrap();
            assert_eq!(x.shape(), (4, dim));
        }
        let x = pca_features(&g, 9).unwrap();
        for r in 0..4 {
            assert!(x.row(r)[4..].iter().all(|&v| v == 0.0));
        }
        assert!(pca_features(&g, 0).is_err());
    }

    #[test]
    fn edgeless_graph_gives_zero_features() {
        let g = Graph::new(5, []).unwrap();
        let x = pca_features(&g, 3).unwrap();
        assert!(x.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn node_index_width_guard() {
        assert!(node_index_features(5, 4).is_err());
        let x = node_index_features(2, 3).unwrap();
        assert_eq!(x.data(), &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn unknown_ops_policy() {
        let vocab = Vocabulary::new(vec!["Add".into()]).unwrap();
        let ops = vec!["Add".to_string(), "Foo".to_string()];
        let err = one_hot_features(&ops, &vocab, UnknownOpPolicy::Error).unwrap_err();
        match err {
            GapError::FeatureMismatch { missing, .. } => assert_eq!(missing, vec!["Foo"]),
            other => panic!("{other}"),
        }
        let (x, names) = one_hot_features(&ops, &vocab, UnknownOpPolicy::MapToUnk).unwrap();
        assert_eq!(names, vec!["Add", UNKNOWN_OP]);
        assert_eq!(x.data(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn jaccard_similarity() {
        let a = Vocabulary::new(vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let b = Vocabulary::new(vec!["b".into(), "c".into(), "d".into()]).unwrap();
        assert!((a.jaccard(&b) - 0.5).abs() < 1e-15);
    }
}
