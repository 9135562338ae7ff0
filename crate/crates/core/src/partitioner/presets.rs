use serde::{Deserialize, Serialize};

use super::model::ModelSpec;
use super::train::TrainConfig;
use crate::embedding::{EmbeddingKind, EmbeddingMode, NeighborSample, ProjectionBias};
use crate::error::{GapError, Result};
use crate::graph::FeatureSpec;
use crate::loss::{BalanceMode, LossConfig};

/// PCA width used by the featureless-graph presets.
pub const DEFAULT_PCA_DIM: usize = 1000;

/// Epoch budget shared by all presets.
pub const PRESET_MAX_EPOCHS: usize = 1000;

pub const PRESET_NAMES: [&str; 7] = [
    "gap-op-sage-trained",
    "gap-op-gcn-offline",
    "gap-id-gcn-offline",
    "gap-random-1",
    "gap-random-10",
    "gap-scalefree-1",
    "gap-scalefree-10",
];

/// Which features a preset expects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetFeatures {
    /// One-hot op types; the caller supplies the vocabulary.
    OpTypes,
    /// One-hot node ids; the caller supplies the width.
    NodeIndex,
    /// PCA of adjacency rows.
    Pca,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub features: PresetFeatures,
    pub embedding: EmbeddingKind,
    pub embedding_mode: EmbeddingMode,
    pub hidden: usize,
    pub sage_steps: usize,
    pub shared_pooling: bool,
    pub head_layers: Vec<usize>,
    pub learning_rate: f64,
    pub balance_mode: BalanceMode,
}

pub fn preset(name: &str) -> Result<Preset> {
    let sage = |name, features, hidden, steps, shared, head: &[usize], lr, balance_mode| Preset {
        name,
        features,
        embedding: EmbeddingKind::Sage,
        embedding_mode: EmbeddingMode::Trained,
        hidden,
        sage_steps: steps,
        shared_pooling: shared,
        head_layers: head.to_vec(),
        learning_rate: lr,
        balance_mode,
    };
    let gcn_offline = |name, features| Preset {
        name,
        features,
        embedding: EmbeddingKind::Gcn,
        embedding_mode: EmbeddingMode::Offline,
        hidden: 64,
        sage_steps: 0,
        shared_pooling: false,
        head_layers: vec![64, 64, 64],
        learning_rate: 7.5e-5,
        balance_mode: BalanceMode::Raw,
    };
    use PresetFeatures::*;
    Ok(match name {
        "gap-op-sage-trained" => sage("gap-op-sage-trained", OpTypes, 512, 5, true, &[64, 64, 64], 7.5e-5, BalanceMode::Raw),
        "gap-op-gcn-offline" => gcn_offline("gap-op-gcn-offline", OpTypes),
        "gap-id-gcn-offline" => gcn_offline("gap-id-gcn-offline", NodeIndex),
        "gap-random-1" => sage("gap-random-1", Pca, 128, 5, true, &[64, 64], 7.5e-4, BalanceMode::Normalized),
        "gap-random-10" => sage("gap-random-10", Pca, 256, 2, true, &[128, 128, 128], 7.5e-6, BalanceMode::Normalized),
        "gap-scalefree-1" => sage("gap-scalefree-1", Pca, 512, 5, false, &[128, 128, 128], 2.5e-6, BalanceMode::Normalized),
        "gap-scalefree-10" => sage("gap-scalefree-10", Pca, 128, 4, false, &[64], 7.5e-6, BalanceMode::Normalized),
        other => {
            return Err(GapError::InvalidArgument(format!(
                "unknown preset {other:?}; known presets: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    })
}

impl Preset {
    /// Model spec for `partitions`. `features` overrides the preset's
    /// feature source and is required for op-type and node-index presets.
    pub fn model_spec(&self, partitions: usize, features: Option<FeatureSpec>) -> Result<ModelSpec> {
        let features = match (features, self.features) {
            (Some(f), _) => f,
            (None, PresetFeatures::Pca) => FeatureSpec::Pca { dim: DEFAULT_PCA_DIM },
            (None, kind) => {
                return Err(GapError::InvalidArgument(format!(
                    "preset {} needs {kind:?} features to be specified",
                    self.name
                )))
            }
        };
        let spec = ModelSpec {
            partitions,
            embedding: self.embedding,
            embedding_mode: self.embedding_mode,
            hidden: self.hidden,
            sage_steps: self.sage_steps,
            shared_pooling: self.shared_pooling,
            neighbor_sample: NeighborSample::All,
            projection_bias: ProjectionBias::Agg,
            head_layers: self.head_layers.clone(),
            features,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            loss: LossConfig {
                balance_mode: self.balance_mode,
                ..LossConfig::default()
            },
            preset: Some(self.name.to_string()),
            ..TrainConfig::new(self.learning_rate, PRESET_MAX_EPOCHS, seed)
        }
    }
}
