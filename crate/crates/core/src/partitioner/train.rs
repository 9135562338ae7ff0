use std::time::Instant;

use rand::seq::SliceRandom;
use rand::seq::index;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::model::{GapModel, PreparedGraph};
use crate::embedding::{NeighborSample, Sampling};
use crate::error::{GapError, Result};
use crate::eval::{balancedness, edge_cut_ratio};
use crate::graph::Graph;
use crate::loss::{evaluate_loss, gap_loss, HardAssignment, LossConfig, LossGraph};
use crate::numeric::{AdamConfig, AdamState, Gradients, Matrix, ParamId, Tape};
use crate::rng::{mix_seed, seeded};

pub const DEFAULT_PATIENCE: usize = 50;

/// Nodes per loss evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Minibatch {
    #[default]
    Full,
    Nodes(usize),
}

impl Serialize for Minibatch {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Minibatch::Full => s.serialize_str("full"),
            Minibatch::Nodes(c) => s.serialize_u64(*c as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Minibatch {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(c) if c >= 2 => Ok(Minibatch::Nodes(c as usize)),
            Raw::Count(c) => Err(serde::de::Error::custom(format!("minibatch needs at least 2 nodes, got {c}"))),
            Raw::Word(w) if w == "full" => Ok(Minibatch::Full),
            Raw::Word(w) => Err(serde::de::Error::custom(format!("expected a node count or \"full\", got {w:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub loss: LossConfig,
    #[serde(default)]
    pub minibatch: Minibatch,
    /// Epochs without improvement before stopping; `None` never stops early
    /// and is written as `"never"`.
    #[serde(default = "default_patience", with = "patience_serde")]
    pub patience: Option<usize>,
    /// Average gradients over all training graphs and take one step per
    /// epoch, instead of one step per graph visit.
    #[serde(default)]
    pub accumulate_gradients: bool,
    /// Stop as soon as the selection loss reaches this value.
    #[serde(default)]
    pub target_loss: Option<f64>,
    #[serde(default)]
    pub preset: Option<String>,
}

fn default_patience() -> Option<usize> {
    Some(DEFAULT_PATIENCE)
}

// Formats without a null (TOML) would otherwise drop `None` and read the
// default back.
mod patience_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &Option<usize>, s: S) -> Result<S::Ok, S::Error> {
        match p {
            Some(n) => s.serialize_u64(*n as u64),
            None => s.serialize_str("never"),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Word(String),
            Null(()),
        }
        match Raw::deserialize(d)? {
            Raw::Count(n) => Ok(Some(n as usize)),
            Raw::Word(w) if w == "never" => Ok(None),
            Raw::Word(w) => Err(serde::de::Error::custom(format!("expected an epoch count or \"never\", got {w:?}"))),
            Raw::Null(()) => Ok(None),
        }
    }
}

impl TrainConfig {
    pub fn new(learning_rate: f64, max_epochs: usize, seed: u64) -> Self {
        TrainConfig {
            learning_rate,
            max_epochs,
            seed,
            loss: LossConfig::default(),
            minibatch: Minibatch::Full,
            patience: default_patience(),
            accumulate_gradients: false,
            target_loss: None,
            preset: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(GapError::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.max_epochs == 0 {
            return Err(GapError::InvalidArgument("max_epochs must be at least 1".into()));
        }
        if !(self.loss.lambda_balance >= 0.0) {
            return Err(GapError::InvalidArgument("lambda_balance must be non-negative".into()));
        }
        Ok(())
    }
}

/// Loss terms and hard metrics from one graph visit, measured on the
/// weights before that visit's update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub graph: usize,
    pub loss: f64,
    pub expected_ncut: f64,
    pub balance_error: f64,
    pub edge_cut_ratio: f64,
    pub balancedness: f64,
    /// Loss of the argmax assignment on the full graph.
    pub hard_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    /// Empty when there were no validation graphs.
    pub validation: Vec<ValidationRecord>,
    pub best_epoch: usize,
    /// Selection loss of the returned weights.
    pub best_loss: f64,
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub reached_target: bool,
    pub wall_clock_ms: f64,
}

impl TrainReport {
    pub fn history_csv(&self) -> String {
        let mut s = String::from("epoch,graph,loss,expected_ncut,balance_error,edge_cut_ratio,balancedness,hard_loss\n");
        for r in &self.history {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.epoch, r.graph, r.loss, r.expected_ncut, r.balance_error, r.edge_cut_ratio, r.balancedness, r.hard_loss
            ));
        }
        s
    }

    /// Records of one training graph, in epoch order.
    pub fn graph_history(&self, graph: usize) -> Vec<&EpochRecord> {
        self.history.iter().filter(|r| r.graph == graph).collect()
    }
}

pub struct TrainOutcome {
    pub report: TrainReport,
    /// Optimizer state after the last step, for resuming.
    pub optimizer: AdamState,
}

/// Full-batch (or minibatch) training on one graph. Same as
/// [`train_multi_graph`] with a single training graph and no validation
/// graphs, so model selection uses the training loss.
pub fn train_single_graph(model: &mut GapModel, g: &Graph, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_multi_graph(model, std::slice::from_ref(g), &[], cfg)
}

pub fn train_multi_graph(model: &mut GapModel, train: &[Graph], val: &[Graph], cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_resume(model, train, val, cfg, None)
}

/// Training loop. Each epoch visits the training graphs in a seeded shuffle
/// and takes one Adam step per visit (or one averaged step per epoch with
/// `accumulate_gradients`).
///
/// Model selection: with validation graphs, the mean validation loss of the
/// weights at the end of the epoch; without, the mean training loss
/// recorded during the epoch, attributed to the weights at the start of the
/// epoch. The best weights are written back into `model` on return, also
/// when training fails with a numeric error.
pub fn train_resume(
    model: &mut GapModel,
    train: &[Graph],
    val: &[Graph],
    cfg: &TrainConfig,
    optimizer: Option<AdamState>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(GapError::InvalidArgument("no training graphs".into()));
    }
    let start = Instant::now();
    let train_prep = train.iter().map(|g| model.prepare(g)).collect::<Result<Vec<_>>>()?;
    let val_prep = val.iter().map(|g| model.prepare(g)).collect::<Result<Vec<_>>>()?;
    let mut out = train_prepared(model, train, &train_prep, &val_prep, cfg, optimizer);
    if let Ok(o) = out.as_mut() {
        o.report.wall_clock_ms = start.elapsed().as_secs_f64() * 1e3;
    }
    out
}

/// [`train_resume`] on graphs already run through [`GapModel::prepare`].
/// `train_prep[i]` must belong to `train[i]`. The reported wall clock
/// excludes feature construction.
pub fn train_prepared(
    model: &mut GapModel,
    train: &[Graph],
    train_prep: &[PreparedGraph],
    val_prep: &[PreparedGraph],
    cfg: &TrainConfig,
    optimizer: Option<AdamState>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() || train.len() != train_prep.len() {
        return Err(GapError::InvalidArgument(format!(
            "need at least one training graph and one prepared graph each, got {} and {}",
            train.len(),
            train_prep.len()
        )));
    }
    let start = Instant::now();
    let mut adam = match optimizer {
        Some(state) => {
            if state.moments().0.len() != model.store().len() {
                return Err(GapError::Checkpoint("optimizer state does not match the model layout".into()));
            }
            AdamState {
                config: AdamConfig::new(cfg.learning_rate),
                ..state
            }
        }
        None => AdamState::new(AdamConfig::new(cfg.learning_rate), model.store()),
    };
    let trainable: Vec<ParamId> = model.store().iter().filter(|(_, p)| p.trainable).map(|(id, _)| id).collect();
    let snapshot = |m: &GapModel| -> Vec<Matrix> { trainable.iter().map(|&id| m.store().value(id).clone()).collect() };

    let mut report = TrainReport {
        history: Vec::new(),
        validation: Vec::new(),
        best_epoch: 0,
        best_loss: f64::INFINITY,
        epochs_run: 0,
        stopped_early: false,
        reached_target: false,
        wall_clock_ms: 0.0,
    };
    let mut best_weights = snapshot(model);
    let mut since_best = 0;

    let result: Result<()> = (|| {
        for epoch in 0..cfg.max_epochs {
            let start_weights = val_prep.is_empty().then(|| snapshot(model));
            let mut order: Vec<usize> = (0..train.len()).collect();
            order.shuffle(&mut seeded(mix_seed(&[cfg.seed, epoch as u64, 0x5f])));
            let mut acc: Option<Gradients> = None;
            let mut loss_sum = 0.0;
            for &gi in &order {
                let step_seed = mix_seed(&[cfg.seed, epoch as u64, gi as u64]);
                let (record, grads) = visit(model, &train[gi], &train_prep[gi], cfg, step_seed, epoch, gi)?;
                loss_sum += record.loss;
                report.history.push(record);
                if cfg.accumulate_gradients {
                    match acc.as_mut() {
                        Some(a) => a.accumulate(&grads),
                        None => acc = Some(grads),
                    }
                } else {
                    adam.step(model.store_mut(), &grads).map_err(|e| numeric(e, epoch))?;
                }
            }
            if let Some(mut a) = acc {
                a.scale(1.0 / train.len() as f64);
                adam.step(model.store_mut(), &a).map_err(|e| numeric(e, epoch))?;
            }
            report.epochs_run = epoch + 1;

            let (score, weights) = if val_prep.is_empty() {
                (loss_sum / train.len() as f64, start_weights.unwrap())
            } else {
                let mut total = 0.0;
                for p in val_prep {
                    total += evaluate(model, p, cfg).map_err(|e| numeric(e, epoch))?;
                }
                let mean = total / val_prep.len() as f64;
                report.validation.push(ValidationRecord { epoch, loss: mean });
                (mean, snapshot(model))
            };
            if score < report.best_loss {
                report.best_loss = score;
                report.best_epoch = epoch;
                best_weights = weights;
                since_best = 0;
            } else {
                since_best += 1;
            }
            if cfg.target_loss.is_some_and(|t| report.best_loss <= t) {
                report.reached_target = true;
                break;
            }
            if cfg.patience.is_some_and(|p| since_best >= p) {
                report.stopped_early = true;
                break;
            }
        }
        Ok(())
    })();

    for (&id, w) in trainable.iter().zip(best_weights) {
        *model.store_mut().value_mut(id) = w;
    }
    report.wall_clock_ms = start.elapsed().as_secs_f64() * 1e3;
    result?;
    Ok(TrainOutcome {
        report,
        optimizer: adam,
    })
}

fn numeric(e: GapError, epoch: usize) -> GapError {
    match e {
        GapError::NonFinite(_) => GapError::Diverged { epoch },
        other => other,
    }
}

fn sampling_for(model: &GapModel, seed: u64) -> Sampling {
    match model.spec().neighbor_sample {
        NeighborSample::All => Sampling::All,
        NeighborSample::Count(_) => Sampling::Seeded(seed),
    }
}

fn visit(
    model: &GapModel,
    g: &Graph,
    prep: &PreparedGraph,
    cfg: &TrainConfig,
    seed: u64,
    epoch: usize,
    graph: usize,
) -> Result<(EpochRecord, Gradients)> {
    let parts = model.partitions();
    let mut tape = Tape::new();
    let y = model
        .forward(&mut tape, prep, sampling_for(model, seed))
        .map_err(|e| numeric(e, epoch))?;
    let n = prep.num_nodes();
    let terms = match cfg.minibatch {
        Minibatch::Nodes(b) if b < n => {
            let mut rng = seeded(mix_seed(&[seed, 0xba7c]));
            let mut batch = index::sample(&mut rng, n, b).into_vec();
            batch.sort_unstable();
            let lg = LossGraph::new(&g.induced_subgraph(&batch)?);
            let yb = tape.gather_rows(y, &batch)?;
            gap_loss(&mut tape, &lg, yb, parts, &cfg.loss)
        }
        _ => gap_loss(&mut tape, &prep.loss, y, parts, &cfg.loss),
    }
    .map_err(|e| numeric(e, epoch))?;
    let grads = tape.backward(terms.total).map_err(|e| numeric(e, epoch))?;
    let hard = HardAssignment::from_probabilities(tape.value(y));
    let record = EpochRecord {
        epoch,
        graph,
        loss: tape.scalar(terms.total),
        expected_ncut: tape.scalar(terms.expected_ncut),
        balance_error: tape.scalar(terms.balance_error),
        edge_cut_ratio: edge_cut_ratio(g, &hard)?,
        balancedness: balancedness(&hard),
        hard_loss: evaluate_loss(&prep.loss, &hard.one_hot(), &cfg.loss)?.total,
    };
    Ok((record, grads))
}

/// Full-graph loss with complete neighborhoods.
pub fn evaluate(model: &GapModel, prep: &PreparedGraph, cfg: &TrainConfig) -> Result<f64> {
    let mut tape = Tape::new();
    let y = model.forward(&mut tape, prep, Sampling::All)?;
    let terms = gap_loss(&mut tape, &prep.loss, y, model.partitions(), &cfg.loss)?;
    Ok(tape.scalar(terms.total))
}

/// Full-graph loss of `model` on `g` under `cfg`'s loss settings.
pub fn loss_on(model: &GapModel, g: &Graph, cfg: &TrainConfig) -> Result<f64> {
    evaluate(model, &model.prepare(g)?, cfg)
}
