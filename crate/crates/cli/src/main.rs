//! `gap`: generate graphs, train and run GAP partitioners, score
//! assignments and compare against baselines.
//!
//! Exit codes: 0 success, 2 validation error, 3 numeric failure, 4 I/O
//! error.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ExternalConfig, GenerateConfig, GeneratorKind, RunConfig};
use error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "gap", version, about = "Balanced graph partitioning with graph neural networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. Flags override the config file.
#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Named hyperparameter preset.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic graphs as edge-list and METIS files plus a manifest.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: Option<GeneratorKind>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        attach_m: Option<usize>,
        /// Clique sizes for clique-chain, comma separated.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Train a model; writes a checkpoint, the loss history and a report.
    Train {
        #[command(flatten)]
        common: Common,
        /// Training graph (repeatable).
        #[arg(long = "graph")]
        graphs: Vec<PathBuf>,
        /// Validation graph (repeatable).
        #[arg(long = "validation")]
        validation: Vec<PathBuf>,
        #[arg(short = 'g', long)]
        partitions: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        pca_dim: Option<usize>,
        #[arg(long)]
        vocabulary: Option<PathBuf>,
        /// Continue training this checkpoint, optimizer state included.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Partition a graph with a trained model.
    Infer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(short = 'g', long)]
        partitions: Option<usize>,
    },
    /// Score an assignment file against a graph.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        assignment: Option<PathBuf>,
        #[arg(short = 'g', long)]
        partitions: Option<usize>,
        /// Also write degree_histogram.csv.
        #[arg(long)]
        degree_histogram: bool,
    },
    /// Exhaustive minimum normalized cut for small graphs.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(short = 'g', long)]
        partitions: Option<usize>,
        /// Only consider assignments whose sizes differ by at most one.
        #[arg(long)]
        balanced: bool,
    },
    /// Compare partitioners on a set of graphs.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long = "graph")]
        graphs: Vec<PathBuf>,
        #[arg(short = 'g', long)]
        partitions: Option<usize>,
        #[arg(long)]
        repeats: Option<usize>,
        /// Trained model to include as the `gap` column.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// External partitioner as NAME=COMMAND (repeatable).
        #[arg(long, value_parser = commands::parse_external)]
        external: Vec<ExternalConfig>,
        #[arg(long)]
        parallel: bool,
    },
}

fn base_config(common: &Common, name: &str) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.command = Some(name.to_string());
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    if common.out.is_some() {
        cfg.output.dir = common.out.clone();
    }
    if common.preset.is_some() {
        cfg.model.preset = common.preset.clone();
    }
    Ok(cfg)
}

fn set<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate { common, kind, n, p, attach_m, sizes, count } => {
            let mut cfg = base_config(&common, "generate")?;
            let mut gen = match (cfg.generate.take(), kind) {
                (Some(g), _) => g,
                (None, Some(kind)) => GenerateConfig {
                    kind,
                    n: None,
                    p: None,
                    attach_m: gap_core::graph::DEFAULT_ATTACH_M,
                    sizes: Vec::new(),
                    count: 1,
                },
                (None, None) => return Err(CliError::Config("generate needs --kind or a [generate] section".into())),
            };
            if let Some(k) = kind {
                gen.kind = k;
            }
            set(&mut gen.n, n);
            set(&mut gen.p, p);
            if let Some(m) = attach_m {
                gen.attach_m = m;
            }
            if !sizes.is_empty() {
                gen.sizes = sizes;
            }
            if let Some(c) = count {
                gen.count = c;
            }
            cfg.generate = Some(gen);
            commands::generate(&mut cfg)
        }
        Command::Train { common, graphs, validation, partitions, epochs, lr, pca_dim, vocabulary, resume } => {
            let mut cfg = base_config(&common, "train")?;
            if !graphs.is_empty() {
                cfg.dataset.graphs = graphs;
            }
            if !validation.is_empty() {
                cfg.dataset.validation = validation;
            }
            set(&mut cfg.dataset.vocabulary, vocabulary);
            set(&mut cfg.model.partitions, partitions);
            set(&mut cfg.model.pca_dim, pca_dim);
            if let Some(path) = resume {
                cfg.model.checkpoint = Some(path);
                cfg.model.resume = true;
            }
            if let Some(e) = epochs {
                cfg.override_training("max_epochs", e as i64);
            }
            if let Some(lr) = lr {
                cfg.override_training("learning_rate", lr);
            }
            if let Some(seed) = common.seed {
                cfg.override_training("seed", seed as i64);
            }
            commands::train(&mut cfg)
        }
        Command::Infer { common, checkpoint, graph, partitions } => {
            let mut cfg = base_config(&common, "infer")?;
            set(&mut cfg.model.checkpoint, checkpoint);
            if let Some(g) = graph {
                cfg.dataset.graphs = vec![g];
            }
            set(&mut cfg.model.partitions, partitions);
            commands::infer(&mut cfg)
        }
        Command::Eval { common, graph, assignment, partitions, degree_histogram } => {
            let mut cfg = base_config(&common, "eval")?;
            if let Some(g) = graph {
                cfg.dataset.graphs = vec![g];
            }
            set(&mut cfg.dataset.assignment, assignment);
            set(&mut cfg.model.partitions, partitions);
            cfg.output.degree_histogram |= degree_histogram;
            commands::eval(&mut cfg)
        }
        Command::Oracle { common, graph, partitions, balanced } => {
            let mut cfg = base_config(&common, "oracle")?;
            if let Some(g) = graph {
                cfg.dataset.graphs = vec![g];
            }
            set(&mut cfg.model.partitions, partitions);
            cfg.output.balanced |= balanced;
            commands::oracle(&mut cfg)
        }
        Command::Bench { common, graphs, partitions, repeats, checkpoint, external, parallel } => {
            let mut cfg = base_config(&common, "bench")?;
            if !graphs.is_empty() {
                cfg.dataset.graphs = graphs;
            }
            set(&mut cfg.model.partitions, partitions);
            set(&mut cfg.bench.repeats, repeats);
            set(&mut cfg.model.checkpoint, checkpoint);
            cfg.bench.external.extend(external);
            cfg.bench.parallel |= parallel;
            commands::bench(&mut cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Gap(gap_core::GapError::FeatureMismatch { missing, .. }) = &e {
                if !missing.is_empty() {
                    eprintln!("not in the model vocabulary: {}", missing.join(", "));
                }
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
