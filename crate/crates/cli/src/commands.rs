//! One function per subcommand. Each takes a fully merged [`RunConfig`],
//! fills in whatever it resolves (model spec, training settings) and writes
//! the resolved copy next to its outputs.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use gap_core::eval::{
    benchmark, brute_force_min_ncut, degree_histogram_csv, parse_assignment, ExternalPartitioner, Partitioner,
    RandomPartitioner, SpectralPartitioner,
};
use gap_core::embedding::{EmbeddingKind, EmbeddingMode, NeighborSample, ProjectionBias};
use gap_core::graph::{
    atomic_write, clique_chain, erdos_renyi, load_graph, scale_free, write_edge_list, write_metis, FeatureSpec,
    UnknownOpPolicy, Vocabulary,
};
use gap_core::partitioner::{
    load_checkpoint, preset, save_checkpoint, sha256_hex, GapInference, PresetFeatures, DEFAULT_PCA_DIM,
    PRESET_MAX_EPOCHS,
};
use gap_core::rng::mix_seed;
use gap_core::{GapError, GapModel, Graph, HardAssignment, MetricsReport, ModelSpec, TrainConfig};
use serde_json::json;

use crate::config::{ExternalConfig, GeneratorKind, RunConfig};
use crate::error::{CliError, CliResult};

/// Width of the PCA features of the default model.
pub const DEFAULT_MODEL_PCA_DIM: usize = 32;
pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;
pub const DEFAULT_BENCH_REPEATS: usize = 3;

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    Ok(atomic_write(path, text.as_bytes())?)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(GapError::from)?;
    write_text(path, &(text + "\n"))
}

fn assignment_text(a: &HardAssignment) -> String {
    a.parts().iter().map(|p| format!("{p}\n")).collect()
}

fn load_all(paths: &[PathBuf]) -> CliResult<Vec<Graph>> {
    paths.iter().map(|p| Ok(load_graph(p)?)).collect()
}

fn single_graph(cfg: &RunConfig, command: &str) -> CliResult<(PathBuf, Graph)> {
    match cfg.dataset.graphs.as_slice() {
        [p] => Ok((p.clone(), load_graph(p)?)),
        [] => Err(CliError::Config(format!("{command} needs a graph: pass --graph or set dataset.graphs"))),
        more => Err(CliError::Config(format!("{command} takes one graph, got {}", more.len()))),
    }
}

fn graph_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn generate(cfg: &mut RunConfig) -> CliResult<()> {
    let gen = cfg
        .generate
        .clone()
        .ok_or_else(|| CliError::Config("generate needs --kind or a [generate] section".into()))?;
    let seed = cfg.seed();
    let need = |v: Option<usize>, what: &str| v.ok_or_else(|| CliError::Config(format!("{what} is required for this generator")));
    let mut graphs = Vec::with_capacity(gen.count);
    for i in 0..gen.count {
        let s = mix_seed(&[seed, i as u64]);
        let g = match gen.kind {
            GeneratorKind::Er => {
                let p = gen.p.ok_or_else(|| CliError::Config("--p is required for er".into()))?;
                erdos_renyi(need(gen.n, "--n")?, p, s)?
            }
            GeneratorKind::ScaleFree => scale_free(need(gen.n, "--n")?, s, gen.attach_m)?,
            GeneratorKind::CliqueChain => clique_chain(&gen.sizes)?,
        };
        graphs.push((s, g));
    }
    let out = cfg.out_dir()?;
    let kind = serde_json::to_value(gen.kind).map_err(GapError::from)?;
    let stem = kind.as_str().unwrap_or("graph").to_string();
    let mut files = Vec::new();
    for (i, (s, g)) in graphs.iter().enumerate() {
        let edges = out.join(format!("{stem}_{i:03}.edges"));
        let metis = out.join(format!("{stem}_{i:03}.metis"));
        write_edge_list(g, &edges)?;
        write_metis(g, &metis)?;
        let digest = sha256_hex(&std::fs::read(&edges).map_err(|e| CliError::io(&edges, e))?);
        files.push(json!({
            "index": i,
            "seed": s,
            "edge_list": edges.file_name().unwrap().to_string_lossy(),
            "metis": metis.file_name().unwrap().to_string_lossy(),
            "nodes": g.num_nodes(),
            "edges": g.num_edges(),
            "edge_list_sha256": digest,
        }));
    }
    let manifest = json!({ "seed": seed, "generator": gen, "files": files });
    write_json(&out.join("manifest.json"), &manifest)?;
    cfg.write_resolved(&out)?;
    println!("wrote {} graph(s) to {}", gen.count, out.display());
    Ok(())
}

/// Columns for op-type presets: the given vocabulary file, else the sorted
/// union of the op types seen in the graphs.
fn vocabulary_for(cfg: &RunConfig, graphs: &[&Graph]) -> CliResult<Vocabulary> {
    if let Some(path) = &cfg.dataset.vocabulary {
        return Ok(Vocabulary::load(path)?);
    }
    let mut names = BTreeSet::new();
    for g in graphs {
        let Some(cols) = g.feature_names() else {
            return Err(CliError::Gap(GapError::FeatureMismatch {
                message: "op-type preset needs featured graphs or a vocabulary file".into(),
                missing: Vec::new(),
            }));
        };
        names.extend(cols.iter().cloned());
    }
    Ok(Vocabulary::new(names.into_iter().collect())?)
}

fn default_spec(partitions: usize, pca_dim: usize) -> ModelSpec {
    ModelSpec {
        partitions,
        embedding: EmbeddingKind::Gcn,
        embedding_mode: EmbeddingMode::Trained,
        hidden: 32,
        sage_steps: 2,
        shared_pooling: false,
        neighbor_sample: NeighborSample::All,
        projection_bias: ProjectionBias::Agg,
        head_layers: vec![32],
        features: FeatureSpec::Pca { dim: pca_dim },
    }
}

/// Architecture and base training settings from the config.
fn resolve_model(cfg: &RunConfig, graphs: &[&Graph]) -> CliResult<(ModelSpec, TrainConfig)> {
    let seed = cfg.seed();
    let p = cfg.model.preset.as_deref().map(preset).transpose()?;
    let base = match &p {
        Some(p) => p.train_config(seed),
        None => TrainConfig::new(DEFAULT_LEARNING_RATE, PRESET_MAX_EPOCHS, seed),
    };
    if let Some(spec) = &cfg.model.spec {
        if cfg.model.partitions.is_some_and(|g| g != spec.partitions) {
            return Err(CliError::Config(format!(
                "model.partitions = {} disagrees with model.spec.partitions = {}",
                cfg.model.partitions.unwrap(),
                spec.partitions
            )));
        }
        spec.validate()?;
        return Ok((spec.clone(), base));
    }
    let parts = cfg
        .model
        .partitions
        .ok_or_else(|| CliError::Config("number of partitions missing: pass -g or set model.partitions".into()))?;
    let spec = match &p {
        None => default_spec(parts, cfg.model.pca_dim.unwrap_or(DEFAULT_MODEL_PCA_DIM)),
        Some(p) => {
            let features = match p.features {
                PresetFeatures::Pca => FeatureSpec::Pca {
                    dim: cfg.model.pca_dim.unwrap_or(DEFAULT_PCA_DIM),
                },
                PresetFeatures::OpTypes => FeatureSpec::OneHot {
                    vocabulary: vocabulary_for(cfg, graphs)?,
                    unknown: UnknownOpPolicy::Error,
                },
                PresetFeatures::NodeIndex => FeatureSpec::NodeIndex {
                    width: graphs.iter().map(|g| g.num_nodes()).max().unwrap_or(1),
                },
            };
            p.model_spec(parts, Some(features))?
        }
    };
    Ok((spec, base))
}

pub fn train(cfg: &mut RunConfig) -> CliResult<()> {
    if cfg.dataset.graphs.is_empty() {
        return Err(CliError::Config("train needs at least one graph: pass --graph or set dataset.graphs".into()));
    }
    let train_graphs = load_all(&cfg.dataset.graphs)?;
    let val_graphs = load_all(&cfg.dataset.validation)?;
    let all: Vec<&Graph> = train_graphs.iter().chain(&val_graphs).collect();

    let (mut model, optimizer, base) = if cfg.model.resume {
        let path = cfg
            .model
            .checkpoint
            .clone()
            .ok_or_else(|| CliError::Config("--resume needs a checkpoint".into()))?;
        let ckpt = load_checkpoint(&path)?;
        if cfg.model.partitions.is_some_and(|g| g != ckpt.model.partitions()) {
            ckpt.model.check_partitions(cfg.model.partitions.unwrap())?;
        }
        let base = TrainConfig::new(DEFAULT_LEARNING_RATE, PRESET_MAX_EPOCHS, cfg.seed());
        (ckpt.model, ckpt.optimizer, base)
    } else {
        let (spec, base) = resolve_model(cfg, &all)?;
        let init_seed = cfg.model.init_seed.unwrap_or(cfg.seed());
        (GapModel::new(spec, init_seed)?, None, base)
    };
    let tc = cfg.train_config(base)?;

    cfg.model.spec = Some(model.spec().clone());
    cfg.model.partitions = Some(model.partitions());
    cfg.model.init_seed = Some(model.init_seed());
    cfg.set_training(&tc)?;
    let out = cfg.out_dir()?;
    cfg.write_resolved(&out)?;
    // where the outputs go does not change what is trained
    let fingerprint = sha256_hex(RunConfig { output: Default::default(), ..cfg.clone() }.to_toml()?.as_bytes());

    let outcome = gap_core::partitioner::train_resume(&mut model, &train_graphs, &val_graphs, &tc, optimizer)?;
    let report = &outcome.report;
    save_checkpoint(&model, &out.join("model.ckpt"), Some(&outcome.optimizer), Some(&fingerprint))?;
    if let FeatureSpec::OneHot { vocabulary, .. } = &model.spec().features {
        vocabulary.save(&out.join("vocabulary.txt"))?;
    }
    write_text(&out.join("history.csv"), &report.history_csv())?;
    write_json(&out.join("train_report.json"), report)?;
    println!(
        "trained {} epoch(s) in {:.0} ms; best loss {:.6} at epoch {}{}",
        report.epochs_run,
        report.wall_clock_ms,
        report.best_loss,
        report.best_epoch,
        if report.stopped_early { " (stopped early)" } else { "" }
    );
    Ok(())
}

fn checkpoint_path(cfg: &RunConfig, command: &str) -> CliResult<PathBuf> {
    cfg.model
        .checkpoint
        .clone()
        .ok_or_else(|| CliError::Config(format!("{command} needs --checkpoint or model.checkpoint")))
}

pub fn infer(cfg: &mut RunConfig) -> CliResult<()> {
    let ckpt = load_checkpoint(&checkpoint_path(cfg, "infer")?)?;
    if let Some(g) = cfg.model.partitions {
        ckpt.model.check_partitions(g)?;
    }
    let (_, g) = single_graph(cfg, "infer")?;
    let inf = ckpt.model.infer(&g)?;
    let out = cfg.out_dir()?;
    cfg.write_resolved(&out)?;
    write_text(&out.join("assignment.txt"), &assignment_text(&inf.assignment))?;
    write_json(&out.join("metrics.json"), &inf.metrics)?;
    println!(
        "edge cut ratio {:.4}, balancedness {:.4}, {:.1} ms",
        inf.metrics.edge_cut_ratio, inf.metrics.balancedness, inf.metrics.wall_clock_ms
    );
    Ok(())
}

pub fn eval(cfg: &mut RunConfig) -> CliResult<()> {
    let (_, g) = single_graph(cfg, "eval")?;
    let want_hist = cfg.output.degree_histogram;
    let report = match &cfg.dataset.assignment {
        None if want_hist => None,
        None => return Err(CliError::Config("eval needs --assignment (or --degree-histogram)".into())),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let parts = match cfg.model.partitions {
                Some(p) => p,
                // highest id seen, but never fewer than two parts
                None => text.lines().filter_map(|l| l.trim().parse::<usize>().ok()).max().map_or(2, |m| (m + 1).max(2)),
            };
            let a = parse_assignment(&text, g.num_nodes(), parts)?;
            Some(MetricsReport::compute(&g, &a, None, 0.0)?)
        }
    };
    let out = cfg.out_dir()?;
    cfg.write_resolved(&out)?;
    if let Some(r) = &report {
        write_json(&out.join("metrics.json"), r)?;
        println!(
            "edge cut ratio {:.4}, balancedness {:.4}, ncut {:.4}",
            r.edge_cut_ratio, r.balancedness, r.exact_ncut
        );
    }
    if want_hist {
        write_text(&out.join("degree_histogram.csv"), &degree_histogram_csv(&g))?;
    }
    Ok(())
}

pub fn oracle(cfg: &mut RunConfig) -> CliResult<()> {
    let (_, g) = single_graph(cfg, "oracle")?;
    let parts = cfg.model.partitions.unwrap_or(2);
    let res = brute_force_min_ncut(&g, parts, cfg.output.balanced)?;
    let out = cfg.out_dir()?;
    cfg.write_resolved(&out)?;
    write_json(&out.join("oracle.json"), &res)?;
    write_text(&out.join("assignment.txt"), &assignment_text(&res.assignment))?;
    println!("minimum ncut {:.4} over {} assignments", res.ncut, res.enumerated);
    Ok(())
}

pub fn bench(cfg: &mut RunConfig) -> CliResult<()> {
    if cfg.dataset.graphs.is_empty() {
        return Err(CliError::Config("bench needs at least one graph".into()));
    }
    let graphs: Vec<(String, Graph)> = cfg
        .dataset
        .graphs
        .iter()
        .map(|p| Ok((graph_name(p), load_graph(p)?)))
        .collect::<CliResult<_>>()?;
    let parts = cfg.model.partitions.unwrap_or(2);
    let repeats = cfg.bench.repeats.unwrap_or(DEFAULT_BENCH_REPEATS);
    let model = match &cfg.model.checkpoint {
        Some(p) => Some(load_checkpoint(p)?.model),
        None => None,
    };
    let gap = model.as_ref().map(|m| GapInference {
        name: "gap".into(),
        model: m,
        training_ms: None,
    });
    let external: Vec<ExternalPartitioner> = cfg
        .bench
        .external
        .iter()
        .map(|e| ExternalPartitioner {
            name: e.name.clone(),
            template: e.command.clone(),
        })
        .collect();
    let mut list: Vec<&dyn Partitioner> = vec![&SpectralPartitioner, &RandomPartitioner];
    if let Some(g) = &gap {
        list.push(g);
    }
    list.extend(external.iter().map(|e| e as &dyn Partitioner));

    let report = benchmark(&list, &graphs, parts, repeats, cfg.seed(), cfg.bench.parallel);
    let out = cfg.out_dir()?;
    cfg.write_resolved(&out)?;
    let csv = report.to_csv();
    write_text(&out.join("bench.csv"), &csv)?;
    write_text(&out.join("bench.json"), &report.to_json()?)?;
    print!("{csv}");
    Ok(())
}

/// Parses `name=command`.
pub fn parse_external(s: &str) -> Result<ExternalConfig, String> {
    match s.split_once('=') {
        Some((name, command)) if !name.is_empty() && !command.is_empty() => Ok(ExternalConfig {
            name: name.to_string(),
            command: command.to_string(),
        }),
        _ => Err(format!("expected NAME=COMMAND, got {s:?}")),
    }
}
