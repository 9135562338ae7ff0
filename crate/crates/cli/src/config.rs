//! Declarative run configuration.
//!
//! A run reads an optional TOML file, applies command-line flags on top
//! (flags win) and writes the fully resolved result to
//! `<out>/config.resolved.toml`. Feeding that file back with `--config`
//! repeats the run.

use std::path::{Path, PathBuf};

use gap_core::graph::atomic_write;
use gap_core::{ModelSpec, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const RESOLVED_CONFIG: &str = "config.resolved.toml";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Subcommand that produced a resolved copy. Informational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenerateConfig>,
    #[serde(default)]
    pub model: ModelConfig,
    /// Training settings. Keys are those of the core `TrainConfig`; anything
    /// left out comes from the preset or the defaults.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<toml::Table>,
    #[serde(default)]
    pub bench: BenchConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Training graphs for `train`, target graphs for the other commands.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub graphs: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub validation: Vec<PathBuf>,
    /// One op type per line; used by one-hot presets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocabulary: Option<PathBuf>,
    /// Assignment file scored by `eval`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    Er,
    ScaleFree,
    CliqueChain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub kind: GeneratorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default = "default_attach_m")]
    pub attach_m: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_count")]
    pub count: usize,
}

fn default_attach_m() -> usize {
    gap_core::graph::DEFAULT_ATTACH_M
}

fn default_count() -> usize {
    1
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partitions: Option<usize>,
    /// PCA width for PCA-featured presets and the default model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pca_dim: Option<usize>,
    /// Explicit architecture; takes precedence over the preset's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_seed: Option<u64>,
    /// Checkpoint read by `infer` and `bench`, or resumed by `train`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub resume: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalConfig {
    pub name: String,
    /// Shell command; `{graph}` and `{g}` are substituted.
    pub command: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeats: Option<usize>,
    #[serde(default)]
    pub parallel: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub external: Vec<ExternalConfig>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Also write the degree histogram CSV in `eval`.
    #[serde(default)]
    pub degree_histogram: bool,
    /// Require balanced partitions in `oracle`.
    #[serde(default)]
    pub balanced: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string_pretty(self).map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))
    }

    /// Writes the resolved copy and returns its text.
    pub fn write_resolved(&self, out: &Path) -> CliResult<String> {
        let text = self.to_toml()?;
        atomic_write(&out.join(RESOLVED_CONFIG), text.as_bytes())?;
        Ok(text)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> CliResult<PathBuf> {
        let dir = self
            .output
            .dir
            .clone()
            .ok_or_else(|| CliError::Config("no output directory: pass --out or set output.dir".into()))?;
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(dir)
    }

    /// Overlays the `training` table on `base`. Unknown keys are rejected.
    pub fn train_config(&self, base: TrainConfig) -> CliResult<TrainConfig> {
        let Some(table) = &self.training else {
            return Ok(base);
        };
        let mut merged = toml::Table::try_from(&base)
            .map_err(|e| CliError::Config(format!("cannot serialize training config: {e}")))?;
        for (k, v) in table {
            merged.insert(k.clone(), v.clone());
        }
        let cfg: TrainConfig = merged
            .try_into()
            .map_err(|e| CliError::Config(format!("[training]: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set_training(&mut self, cfg: &TrainConfig) -> CliResult<()> {
        self.training = Some(
            toml::Table::try_from(cfg).map_err(|e| CliError::Config(format!("cannot serialize training config: {e}")))?,
        );
        Ok(())
    }

    /// Sets one training key, as a command-line flag does.
    pub fn override_training(&mut self, key: &str, value: impl Into<toml::Value>) {
        self.training.get_or_insert_with(toml::Table::new).insert(key.to_string(), value.into());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("seed = 1\nbogus = 2\n").is_err());
        assert!(toml::from_str::<RunConfig>("[model]\npresett = \"x\"\n").is_err());
        let cfg: RunConfig = toml::from_str("[training]\nlearning_rat = 0.1\n").unwrap();
        assert!(cfg.train_config(TrainConfig::new(0.1, 3, 0)).is_err());
    }

    #[test]
    fn training_overlay_keeps_unset_fields() {
        let cfg: RunConfig = toml::from_str("[training]\nmax_epochs = 7\npatience = \"never\"\n").unwrap();
        let t = cfg.train_config(TrainConfig::new(0.5, 100, 3)).unwrap();
        assert_eq!((t.learning_rate, t.max_epochs, t.seed, t.patience), (0.5, 7, 3, None));
    }

    #[test]
    fn resolved_copy_round_trips() {
        let mut cfg = RunConfig { seed: Some(4), ..RunConfig::default() };
        cfg.set_training(&TrainConfig { patience: None, ..TrainConfig::new(0.01, 9, 4) }).unwrap();
        cfg.dataset.graphs = vec!["a.edges".into()];
        cfg.bench.external.push(ExternalConfig { name: "x".into(), command: "cat {graph}".into() });
        let back: RunConfig = toml::from_str(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.train_config(TrainConfig::new(1.0, 1, 0)).unwrap().patience, None);
    }
}
