//! Balanced graph partitioning by minimizing a differentiable relaxation of
//! the normalized cut.
//!
//! A graph embedding module (GCN or GraphSAGE) maps every node to a vector;
//! a dense softmax head turns that vector into a distribution over `g`
//! partitions. The expected normalized cut of those distributions, plus a
//! penalty on expected partition sizes, is minimized with Adam. Because the
//! model only sees node features and local structure, a trained model can
//! partition graphs it has never seen in a single forward pass.
//!
//! Module map:
//!
//! - [`graph`]: graph type, file formats, generators, node features
//! - [`numeric`]: matrices, the differentiation tape, Adam, Lanczos
//! - [`embedding`]: GCN and GraphSAGE forward passes
//! - [`loss`]: exact and expected cut / normalized cut, balance error
//! - [`partitioner`]: the full model, training, inference, checkpoints
//! - [`eval`]: metrics, brute-force oracle, spectral and random baselines,
//!   benchmark harness
//!
//! ```no_run
//! use gap_core::embedding::{EmbeddingKind, EmbeddingMode, NeighborSample, ProjectionBias};
//! use gap_core::graph::{erdos_renyi, FeatureSpec};
//! use gap_core::partitioner::{train_single_graph, GapModel, ModelSpec, TrainConfig};
//!
//! # fn main() -> gap_core::Result<()> {
//! let g = erdos_renyi(300, 0.05, 7)?;
//! let spec = ModelSpec {
//!     partitions: 3,
//!     embedding: EmbeddingKind::Gcn,
//!     embedding_mode: EmbeddingMode::Trained,
//!     hidden: 32,
//!     sage_steps: 2,
//!     shared_pooling: false,
//!     neighbor_sample: NeighborSample::All,
//!     projection_bias: ProjectionBias::Agg,
//!     head_layers: vec![32],
//!     features: FeatureSpec::Pca { dim: 16 },
//! };
//! let mut model = GapModel::new(spec, 0)?;
//! train_single_graph(&mut model, &g, &TrainConfig::new(1e-3, 500, 0))?;
//! let out = model.infer(&g)?;
//! println!("{:?} {:.3}", out.assignment.sizes(), out.metrics.edge_cut_ratio);
//! # Ok(())
//! # }
//! ```

pub mod embedding;
pub mod error;
pub mod eval;
pub mod graph;
pub mod loss;
pub mod numeric;
pub mod partitioner;
pub mod rng;

pub use error::{ErrorClass, GapError, Result};
pub use eval::{MetricsReport, OracleResult};
pub use graph::{Graph, HardAssignment};
pub use loss::{LossConfig, LossPath};
pub use numeric::{Matrix, SparseMatrix};
pub use partitioner::{GapModel, ModelSpec, TrainConfig};
