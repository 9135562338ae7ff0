use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{GapError, Result};
use crate::numeric::{xavier_init, Matrix, ParamId, ParamStore, Tape, Var};
use crate::rng::{mix_seed, seeded};

/// How many neighbors each node pools over per step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NeighborSample {
    #[default]
    All,
    Count(usize),
}

impl Serialize for NeighborSample {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NeighborSample::All => s.serialize_str("all"),
            NeighborSample::Count(c) => s.serialize_u64(*c as u64),
        }
    }
}

impl<'de> Deserialize<'de> for NeighborSample {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(0) => Err(serde::de::Error::custom("neighbor sample size must be positive")),
            Raw::Count(c) => Ok(NeighborSample::Count(c as usize)),
            Raw::Word(w) if w == "all" => Ok(NeighborSample::All),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "expected a positive count or \"all\", got {w:?}"
            ))),
        }
    }
}

/// Sampling behavior of one forward pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sampling {
    /// Every neighbor, regardless of the configured sample size.
    All,
    /// Configured sample size, drawn from a stream keyed by this seed.
    Seeded(u64),
}

/// Bias used inside the projection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionBias {
    /// Reuse the aggregation bias.
    #[default]
    Agg,
    /// A separate projection bias.
    Proj,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SageStep {
    pub w_agg: ParamId,
    pub b_agg: ParamId,
    pub w_proj: ParamId,
    pub b_proj: Option<ParamId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SageParams {
    pub steps: Vec<SageStep>,
    pub input_dim: usize,
    pub hidden: usize,
    pub shared_pooling: bool,
    pub neighbor_sample: NeighborSample,
    pub projection_bias: ProjectionBias,
}

impl SageParams {
    /// With `shared_pooling`, every step whose input has the hidden width
    /// uses one aggregation pair. The first step gets its own pair whenever
    /// the feature width differs from the hidden width.
    #[allow(clippy::too_many_arguments)]
    pub fn init(
        store: &mut ParamStore,
        input_dim: usize,
        hidden: usize,
        steps: usize,
        shared_pooling: bool,
        neighbor_sample: NeighborSample,
        projection_bias: ProjectionBias,
        seed: u64,
        trainable: bool,
    ) -> Self {
        let mut shared: Option<(ParamId, ParamId)> = None;
        let mut out = Vec::with_capacity(steps);
        for k in 0..steps {
            let in_w = if k == 0 { input_dim } else { hidden };
            let fresh = |store: &mut ParamStore, tag: &str| {
                (
                    store.add(
                        format!("sage.{tag}.w_agg"),
                        xavier_init(in_w, hidden, mix_seed(&[seed, 0x5a, k as u64, 0])),
                        trainable,
                    ),
                    store.add(format!("sage.{tag}.b_agg"), Matrix::zeros(1, hidden), trainable),
                )
            };
            let (w_agg, b_agg) = if shared_pooling && in_w == hidden {
                *shared.get_or_insert_with(|| fresh(store, "shared"))
            } else {
                fresh(store, &k.to_string())
            };
            let w_proj = store.add(
                format!("sage.{k}.w_proj"),
                xavier_init(in_w + hidden, hidden, mix_seed(&[seed, 0x5a, k as u64, 1])),
                trainable,
            );
            let b_proj = (projection_bias == ProjectionBias::Proj)
                .then(|| store.add(format!("sage.{k}.b_proj"), Matrix::zeros(1, hidden), trainable));
            out.push(SageStep {
                w_agg,
                b_agg,
                w_proj,
                b_proj,
            });
        }
        SageParams {
            steps: out,
            input_dim,
            hidden,
            shared_pooling,
            neighbor_sample,
            projection_bias,
        }
    }

    pub fn output_dim(&self) -> usize {
        if self.steps.is_empty() {
            self.input_dim
        } else {
            self.hidden
        }
    }

    /// Distinct parameter ids, in creation order.
    pub fn ids(&self) -> Vec<ParamId> {
        let mut ids = Vec::new();
        for s in &self.steps {
            for id in [Some(s.w_agg), Some(s.b_agg), Some(s.w_proj), s.b_proj].into_iter().flatten() {
                if !ids.contains(&id) {
                    ids.push(id);
                }
            }
        }
        ids
    }
}

/// Uniform sample without replacement of `min(size, |N(v)|)` neighbors of
/// `node`, returned in ascending order. The draw depends only on `seed` and
/// `node`.
pub fn sample_neighbors(lists: &[Vec<usize>], node: usize, size: NeighborSample, seed: u64) -> Vec<usize> {
    let ns = &lists[node];
    match size {
        NeighborSample::Count(c) if c < ns.len() => {
            let mut rng = seeded(mix_seed(&[seed, node as u64]));
            let mut picked: Vec<usize> = index::sample(&mut rng, ns.len(), c).into_iter().map(|i| ns[i]).collect();
            picked.sort_unstable();
            picked
        }
        _ => ns.clone(),
    }
}

/// GraphSAGE with max-pool aggregation. Per step `k`, for every node:
/// messages `m_j = h_j W_agg + b_agg`, pooled elementwise max over sampled
/// neighbors (zero when there are none), then
/// `h_i = normalize(relu([h_i, pooled_i] W_proj + bias))`.
pub fn sage_forward(
    tape: &mut Tape,
    store: &ParamStore,
    lists: &[Vec<usize>],
    x: Var,
    p: &SageParams,
    sampling: Sampling,
) -> Result<Var> {
    let (n, width) = tape.value(x).shape();
    if width != p.input_dim || n != lists.len() {
        return Err(GapError::shape(
            "sage_forward",
            format!(
                "features are {n}x{width}, expected {}x{}",
                lists.len(),
                p.input_dim
            ),
        ));
    }
    let mut h = x;
    for (k, step) in p.steps.iter().enumerate() {
        let sets: Vec<Vec<usize>> = match sampling {
            Sampling::All => lists.to_vec(),
            Sampling::Seeded(seed) => {
                let step_seed = mix_seed(&[seed, k as u64]);
                (0..n)
                    .into_par_iter()
                    .map(|v| sample_neighbors(lists, v, p.neighbor_sample, step_seed))
                    .collect()
            }
        };
        let w_agg = tape.param(store, step.w_agg)?;
        let b_agg = tape.param(store, step.b_agg)?;
        let msg = tape.matmul(h, w_agg)?;
        let msg = tape.add(msg, b_agg)?;
        let pooled = tape.row_maxpool_over_sets(msg, &sets)?;
        let cat = tape.concat_cols(h, pooled)?;
        let w_proj = tape.param(store, step.w_proj)?;
        let lin = tape.matmul(cat, w_proj)?;
        let bias = match step.b_proj {
            Some(b) => tape.param(store, b)?,
            None => b_agg,
        };
        let lin = tape.add(lin, bias)?;
        let act = tape.relu(lin)?;
        h = tape.l2_normalize_rows(act)?;
    }
    Ok(h)
}
