use std::path::PathBuf;
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{balancedness, edge_cut_ratio};
use super::spectral::{random_partition, spectral_partition};
use crate::error::{GapError, Result};
use crate::graph::{write_metis, Graph};
use crate::loss::HardAssignment;
use crate::rng::mix_seed;

/// Anything that turns a graph into a hard assignment.
pub trait Partitioner: Sync {
    fn name(&self) -> String;

    fn partition(&self, g: &Graph, parts: usize, seed: u64) -> Result<HardAssignment>;

    /// Time spent fitting before any `partition` call, reported separately
    /// from per-call timings.
    fn training_ms(&self) -> Option<f64> {
        None
    }
}

pub struct SpectralPartitioner;

impl Partitioner for SpectralPartitioner {
    fn name(&self) -> String {
        "spectral".into()
    }

    fn partition(&self, g: &Graph, parts: usize, seed: u64) -> Result<HardAssignment> {
        spectral_partition(g, parts, seed)
    }
}

pub struct RandomPartitioner;

impl Partitioner for RandomPartitioner {
    fn name(&self) -> String {
        "random".into()
    }

    fn partition(&self, g: &Graph, parts: usize, seed: u64) -> Result<HardAssignment> {
        random_partition(g.num_nodes(), parts, seed)
    }
}

/// Runs an external command per graph. The graph is written as a METIS
/// file; `{graph}` in the template is replaced by its path and `{g}` by the
/// partition count. The command must print one partition id per node, one
/// per line, on stdout.
pub struct ExternalPartitioner {
    pub name: String,
    pub template: String,
}

static EXTERNAL_COUNTER: AtomicU64 = AtomicU64::new(0);

impl Partitioner for ExternalPartitioner {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn partition(&self, g: &Graph, parts: usize, _seed: u64) -> Result<HardAssignment> {
        let path: PathBuf = std::env::temp_dir().join(format!(
            "gap-external-{}-{}.metis",
            std::process::id(),
            EXTERNAL_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        write_metis(g, &path)?;
        let cmd = self
            .template
            .replace("{graph}", &path.to_string_lossy())
            .replace("{g}", &parts.to_string());
        let out = Command::new("sh").arg("-c").arg(&cmd).output();
        let _ = std::fs::remove_file(&path);
        let out = out.map_err(|e| GapError::External(format!("{cmd}: {e}")))?;
        if !out.status.success() {
            return Err(GapError::External(format!(
                "{cmd}: exited with {}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        parse_assignment(&String::from_utf8_lossy(&out.stdout), g.num_nodes(), parts)
            .map_err(|e| GapError::External(format!("{cmd}: {e}")))
    }
}

/// Parses one partition id per non-empty line.
pub fn parse_assignment(text: &str, n: usize, parts: usize) -> Result<HardAssignment> {
    let ids = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.parse::<usize>()
                .map_err(|_| GapError::InvalidArgument(format!("line {}: not a partition id: {l:?}", i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    if ids.len() != n {
        return Err(GapError::InvalidArgument(format!(
            "expected {n} partition ids, got {}",
            ids.len()
        )));
    }
    HardAssignment::new(ids, parts)
}

fn null_as_nan<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// Metric columns are NaN (null in JSON) when every repeat failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub partitioner: String,
    pub graph: String,
    pub nodes: usize,
    pub edges: usize,
    pub repeats: usize,
    #[serde(deserialize_with = "null_as_nan")]
    pub edge_cut_mean: f64,
    #[serde(deserialize_with = "null_as_nan")]
    pub edge_cut_sd: f64,
    #[serde(deserialize_with = "null_as_nan")]
    pub balancedness_mean: f64,
    #[serde(deserialize_with = "null_as_nan")]
    pub balancedness_sd: f64,
    #[serde(deserialize_with = "null_as_nan")]
    pub wall_ms_mean: f64,
    #[serde(deserialize_with = "null_as_nan")]
    pub wall_ms_sd: f64,
    /// Fitting time of the partitioner, when it has one.
    pub training_ms: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub partitions: usize,
    pub rows: Vec<BenchRow>,
}

const CSV_HEADER: &str = "partitioner,graph,nodes,edges,repeats,edge_cut_mean,edge_cut_sd,balancedness_mean,balancedness_sd,wall_ms_mean,wall_ms_sd,training_ms,error";

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let err = r.error.as_deref().unwrap_or("").replace(['"', '\n'], " ");
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},\"{}\"\n",
                r.partitioner,
                r.graph,
                r.nodes,
                r.edges,
                r.repeats,
                r.edge_cut_mean,
                r.edge_cut_sd,
                r.balancedness_mean,
                r.balancedness_sd,
                r.wall_ms_mean,
                r.wall_ms_sd,
                opt(r.training_ms),
                err
            ));
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn row(&self, partitioner: &str, graph: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.partitioner == partitioner && r.graph == graph)
    }
}

/// Mean and sample standard deviation (0 for fewer than two values).
fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, var.sqrt())
}

/// Scores every partitioner on every graph `repeats` times. Cells run on the
/// rayon pool when `parallel` is set, which makes wall-clock numbers noisier;
/// a failing cell is recorded and the run continues.
pub fn benchmark(
    partitioners: &[&dyn Partitioner],
    graphs: &[(String, Graph)],
    parts: usize,
    repeats: usize,
    seed: u64,
    parallel: bool,
) -> BenchReport {
    let cells: Vec<(usize, usize)> = (0..partitioners.len())
        .flat_map(|p| (0..graphs.len()).map(move |g| (p, g)))
        .collect();
    let run = |&(p, gi): &(usize, usize)| -> BenchRow {
        let part = partitioners[p];
        let (name, g) = &graphs[gi];
        let mut cuts = Vec::new();
        let mut bals = Vec::new();
        let mut times = Vec::new();
        let mut error = None;
        for r in 0..repeats.max(1) {
            let start = Instant::now();
            let res = part.partition(g, parts, mix_seed(&[seed, gi as u64, r as u64]));
            let ms = start.elapsed().as_secs_f64() * 1e3;
            match res.and_then(|a| Ok((edge_cut_ratio(g, &a)?, balancedness(&a)))) {
                Ok((c, b)) => {
                    cuts.push(c);
                    bals.push(b);
                    times.push(ms);
                }
                Err(e) => {
                    error = Some(e.to_string());
                    break;
                }
            }
        }
        let (edge_cut_mean, edge_cut_sd) = mean_sd(&cuts);
        let (balancedness_mean, balancedness_sd) = mean_sd(&bals);
        let (wall_ms_mean, wall_ms_sd) = mean_sd(&times);
        BenchRow {
            partitioner: part.name(),
            graph: name.clone(),
            nodes: g.num_nodes(),
            edges: g.num_edges(),
            repeats: cuts.len(),
            edge_cut_mean,
            edge_cut_sd,
            balancedness_mean,
            balancedness_sd,
            wall_ms_mean,
            wall_ms_sd,
            training_ms: part.training_ms(),
            error,
        }
    };
    let rows = if parallel {
        cells.par_iter().map(run).collect()
    } else {
        cells.iter().map(run).collect()
    };
    BenchReport { partitions: parts, rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::erdos_renyi;

    struct Failing;

    impl Partitioner for Failing {
        fn name(&self) -> String {
            "failing".into()
        }
        fn partition(&self, _: &Graph, _: usize, _: u64) -> Result<HardAssignment> {
            Err(GapError::External("boom".into()))
        }
    }

    fn graphs() -> Vec<(String, Graph)> {
        (0..5).map(|s| (format!("er{s}"), erdos_renyi(60, 0.1, s).unwrap())).collect()
    }

    #[test]
    fn table_shape_and_sd_columns() {
        let gs = graphs();
        let report = benchmark(&[&SpectralPartitioner, &RandomPartitioner, &Failing], &gs, 3, 3, 1, true);
        assert_eq!(report.rows.len(), 15);
        for r in report.rows.iter().filter(|r| r.partitioner != "failing") {
            assert_eq!(r.repeats, 3);
            assert!(r.edge_cut_sd.is_finite() && r.wall_ms_sd.is_finite());
            assert!(r.error.is_none());
        }
        let f = report.row("failing", "er0").unwrap();
        assert!(f.error.as_deref().unwrap().contains("boom"));
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 16);
        let back: BenchReport = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        assert_eq!(back.rows.len(), 15);
    }

    #[test]
    fn spectral_beats_random() {
        let gs = graphs();
        let report = benchmark(&[&SpectralPartitioner, &RandomPartitioner], &gs, 2, 1, 0, false);
        for (name, _) in &gs {
            assert!(report.row("spectral", name).unwrap().edge_cut_mean < report.row("random", name).unwrap().edge_cut_mean);
        }
    }

    #[test]
    fn external_adapter_round_trip() {
        let ext = ExternalPartitioner {
            name: "alternating".into(),
            template: "awk 'NR > 1 { print (NR % {g}) }' {graph}".into(),
        };
        let g = erdos_renyi(10, 0.5, 1).unwrap();
        let a = ext.partition(&g, 2, 0).unwrap();
        assert_eq!(a.len(), 10);
        assert_eq!(a.sizes(), vec![5, 5]);
        let bad = ExternalPartitioner { name: "bad".into(), template: "exit 3".into() };
        assert!(matches!(bad.partition(&g, 2, 0), Err(GapError::External(_))));
    }

    #[test]
    fn assignment_parsing() {
        assert_eq!(parse_assignment("0\n1\n\n1\n", 3, 2).unwrap().parts(), &[0, 1, 1]);
        assert!(parse_assignment("0\n1\n", 3, 2).is_err());
        assert!(parse_assignment("0\nx\n1\n", 3, 2).is_err());
        assert!(parse_assignment("0\n5\n1\n", 3, 2).is_err());
    }
}
