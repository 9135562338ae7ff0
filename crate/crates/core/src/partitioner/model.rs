use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::embedding::{
    adjacency_lists, gcn_forward, sage_forward, EmbeddingKind, EmbeddingMode, GcnParams, NeighborSample,
    ProjectionBias, SageParams, Sampling,
};
use crate::error::{GapError, Result};
use crate::eval::MetricsReport;
use crate::graph::{build_features, FeatureSpec, Graph};
use crate::loss::{HardAssignment, LossGraph};
use crate::numeric::{xavier_init, Matrix, ParamId, ParamStore, SparseMatrix, Tape, Var};
use crate::rng::mix_seed;

/// Architecture of a GAP model. Fixed at creation; stored in checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub partitions: usize,
    pub embedding: EmbeddingKind,
    #[serde(default)]
    pub embedding_mode: EmbeddingMode,
    /// Embedding width (GCN hidden width or GraphSAGE representation width).
    pub hidden: usize,
    /// GraphSAGE step count; ignored for GCN, which always has three layers.
    #[serde(default = "default_sage_steps")]
    pub sage_steps: usize,
    #[serde(default)]
    pub shared_pooling: bool,
    #[serde(default)]
    pub neighbor_sample: NeighborSample,
    #[serde(default)]
    pub projection_bias: ProjectionBias,
    /// Widths of the hidden dense layers of the head; a final layer of
    /// width `partitions` is always appended.
    pub head_layers: Vec<usize>,
    pub features: FeatureSpec,
}

fn default_sage_steps() -> usize {
    2
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.partitions < 2 {
            return Err(GapError::InvalidArgument(format!(
                "need at least 2 partitions, got {}",
                self.partitions
            )));
        }
        if self.features.width() == 0 {
            return Err(GapError::InvalidArgument("feature width must be positive".into()));
        }
        if self.embedding != EmbeddingKind::None && self.hidden == 0 {
            return Err(GapError::InvalidArgument("embedding width must be positive".into()));
        }
        if self.head_layers.contains(&0) {
            return Err(GapError::InvalidArgument("head layer widths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum EmbeddingParams {
    Gcn(GcnParams),
    Sage(SageParams),
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub w: ParamId,
    pub b: ParamId,
}

/// Embedding module plus a dense softmax head.
#[derive(Clone, Debug)]
pub struct GapModel {
    spec: ModelSpec,
    init_seed: u64,
    store: ParamStore,
    embedding: EmbeddingParams,
    head: Vec<DenseLayer>,
}

/// Per-graph data the forward pass and the loss need, computed once.
#[derive(Clone, Debug)]
pub struct PreparedGraph {
    pub features: Matrix,
    a_hat: Option<Arc<SparseMatrix>>,
    lists: Option<Vec<Vec<usize>>>,
    pub loss: LossGraph,
}

impl PreparedGraph {
    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }
}

/// Result of a single inference pass.
#[derive(Clone, Debug)]
pub struct Inference {
    pub assignment: HardAssignment,
    pub probabilities: Matrix,
    pub metrics: MetricsReport,
}

impl GapModel {
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut store = ParamStore::new();
        let d = spec.features.width();
        let trainable = spec.embedding_mode == EmbeddingMode::Trained;
        let emb_seed = mix_seed(&[seed, 1]);
        let (embedding, width) = match spec.embedding {
            EmbeddingKind::Gcn => (
                EmbeddingParams::Gcn(GcnParams::init(&mut store, d, spec.hidden, emb_seed, trainable)),
                spec.hidden,
            ),
            EmbeddingKind::Sage => {
                let p = SageParams::init(
                    &mut store,
                    d,
                    spec.hidden,
                    spec.sage_steps,
                    spec.shared_pooling,
                    spec.neighbor_sample,
                    spec.projection_bias,
                    emb_seed,
                    trainable,
                );
                let w = p.output_dim();
                (EmbeddingParams::Sage(p), w)
            }
            EmbeddingKind::None => (EmbeddingParams::None, d),
        };
        let mut head = Vec::new();
        let mut in_w = width;
        let widths: Vec<usize> = spec.head_layers.iter().copied().chain([spec.partitions]).collect();
        for (l, &out_w) in widths.iter().enumerate() {
            let w = store.add(
                format!("head.{l}.w"),
                xavier_init(in_w, out_w, mix_seed(&[seed, 2, l as u64])),
                true,
            );
            let b = store.add(format!("head.{l}.b"), Matrix::zeros(1, out_w), true);
            head.push(DenseLayer { w, b });
            in_w = out_w;
        }
        Ok(GapModel {
            spec,
            init_seed: seed,
            store,
            embedding,
            head,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    pub fn partitions(&self) -> usize {
        self.spec.partitions
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn head(&self) -> &[DenseLayer] {
        &self.head
    }

    pub fn embedding_ids(&self) -> Vec<ParamId> {
        match &self.embedding {
            EmbeddingParams::Gcn(p) => p.ids(),
            EmbeddingParams::Sage(p) => p.ids(),
            EmbeddingParams::None => Vec::new(),
        }
    }

    pub fn head_ids(&self) -> Vec<ParamId> {
        self.head.iter().flat_map(|l| [l.w, l.b]).collect()
    }

    /// Checksum over embedding weights; unchanged by training when the
    /// embedding is offline.
    pub fn embedding_checksum(&self) -> u64 {
        self.store.checksum(&self.embedding_ids())
    }

    pub fn head_checksum(&self) -> u64 {
        self.store.checksum(&self.head_ids())
    }

    /// Errors unless the model was built for `parts` partitions.
    pub fn check_partitions(&self, parts: usize) -> Result<()> {
        if parts != self.spec.partitions {
            return Err(GapError::InvalidArgument(format!(
                "model was trained for g = {}, but g = {parts} was requested; g is fixed by the head",
                self.spec.partitions
            )));
        }
        Ok(())
    }

    pub fn prepare(&self, g: &Graph) -> Result<PreparedGraph> {
        let features = build_features(g, &self.spec.features)?;
        let a_hat = matches!(self.spec.embedding, EmbeddingKind::Gcn)
            .then(|| Arc::new(g.normalized_adjacency().into_matrix()));
        let lists = matches!(self.spec.embedding, EmbeddingKind::Sage).then(|| adjacency_lists(g));
        Ok(PreparedGraph {
            features,
            a_hat,
            lists,
            loss: LossGraph::new(g),
        })
    }

    /// Records `Y = softmax(head(embed(X)))` on the tape.
    pub fn forward(&self, tape: &mut Tape, prep: &PreparedGraph, sampling: Sampling) -> Result<Var> {
        self.forward_with(&self.store, tape, prep, sampling)
    }

    /// Like [`GapModel::forward`] but reads weights from `store`, which must
    /// have this model's layout.
    pub fn forward_with(&self, store: &ParamStore, tape: &mut Tape, prep: &PreparedGraph, sampling: Sampling) -> Result<Var> {
        let x = tape.constant(prep.features.clone())?;
        let mut h = match &self.embedding {
            EmbeddingParams::Gcn(p) => {
                let a = prep.a_hat.as_ref().expect("prepared for GCN");
                gcn_forward(tape, store, a, x, p)?
            }
            EmbeddingParams::Sage(p) => {
                let lists = prep.lists.as_ref().expect("prepared for GraphSAGE");
                sage_forward(tape, store, lists, x, p, sampling)?
            }
            EmbeddingParams::None => x,
        };
        let last = self.head.len() - 1;
        for (l, layer) in self.head.iter().enumerate() {
            let w = tape.param(store, layer.w)?;
            let b = tape.param(store, layer.b)?;
            let lin = tape.matmul(h, w)?;
            let lin = tape.add(lin, b)?;
            h = if l == last { lin } else { tape.relu(lin)? };
        }
        tape.row_softmax(h)
    }

    /// Partition probabilities with full neighborhoods.
    pub fn probabilities(&self, prep: &PreparedGraph) -> Result<Matrix> {
        let mut tape = Tape::new();
        let y = self.forward(&mut tape, prep, Sampling::All)?;
        Ok(tape.value(y).clone())
    }

    /// One deterministic forward pass and argmax per row. The timing covers
    /// feature construction and the forward pass.
    pub fn infer(&self, g: &Graph) -> Result<Inference> {
        let start = Instant::now();
        let prep = self.prepare(g)?;
        let y = self.probabilities(&prep)?;
        let assignment = HardAssignment::from_probabilities(&y);
        let ms = start.elapsed().as_secs_f64() * 1e3;
        let metrics = MetricsReport::compute(g, &assignment, Some(&y), ms)?;
        Ok(Inference {
            assignment,
            probabilities: y,
            metrics,
        })
    }
}
