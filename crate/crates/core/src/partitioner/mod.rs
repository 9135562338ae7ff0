//! The GAP model: an embedding module followed by a dense softmax head,
//! with training loops, inference, checkpoints and named presets.

mod checkpoint;
mod model;
mod presets;
mod train;

use std::time::Instant;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, sha256_hex, Checkpoint, CheckpointMeta,
    ShapeEntry, FORMAT_VERSION, MAGIC,
};
pub use model::{DenseLayer, EmbeddingParams, GapModel, Inference, ModelSpec, PreparedGraph};
pub use presets::{preset, Preset, PresetFeatures, DEFAULT_PCA_DIM, PRESET_MAX_EPOCHS, PRESET_NAMES};
pub use train::{
    evaluate, loss_on, train_multi_graph, train_prepared, train_resume, train_single_graph, EpochRecord, Minibatch, TrainConfig,
    TrainOutcome, TrainReport, ValidationRecord, DEFAULT_PATIENCE,
};

use crate::error::Result;
use crate::eval::Partitioner;
use crate::graph::Graph;
use crate::loss::HardAssignment;

/// Inference with an already trained model.
pub struct GapInference<'a> {
    pub name: String,
    pub model: &'a GapModel,
    pub training_ms: Option<f64>,
}

impl Partitioner for GapInference<'_> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn partition(&self, g: &Graph, parts: usize, _seed: u64) -> Result<HardAssignment> {
        self.model.check_partitions(parts)?;
        Ok(self.model.infer(g)?.assignment)
    }

    fn training_ms(&self) -> Option<f64> {
        self.training_ms
    }
}

/// Trains a fresh model on each graph it is asked to partition; timings
/// include training.
pub struct GapPerGraph {
    pub name: String,
    pub spec: ModelSpec,
    pub config: TrainConfig,
}

impl Partitioner for GapPerGraph {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn partition(&self, g: &Graph, parts: usize, seed: u64) -> Result<HardAssignment> {
        let mut spec = self.spec.clone();
        spec.partitions = parts;
        let mut model = GapModel::new(spec, seed)?;
        let cfg = TrainConfig {
            seed,
            ..self.config.clone()
        };
        train_single_graph(&mut model, g, &cfg)?;
        Ok(model.infer(g)?.assignment)
    }
}

/// Trains on `g` and returns the model with its wall-clock training time in
/// milliseconds.
pub fn fit(spec: ModelSpec, g: &Graph, cfg: &TrainConfig, seed: u64) -> Result<(GapModel, TrainReport)> {
    let start = Instant::now();
    let mut model = GapModel::new(spec, seed)?;
    let mut out = train_single_graph(&mut model, g, cfg)?;
    out.report.wall_clock_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((model, out.report))
}
