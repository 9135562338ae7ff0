//! Partition quality metrics, the exhaustive Ncut oracle, spectral and
//! random baselines, and the benchmark harness.

mod bench;
mod metrics;
mod oracle;
mod spectral;

pub use bench::{
    benchmark, parse_assignment, BenchReport, BenchRow, ExternalPartitioner, Partitioner, RandomPartitioner,
    SpectralPartitioner,
};
pub use metrics::{
    balancedness, balancedness_of_sizes, best_balancedness, degree_histogram, degree_histogram_csv, edge_cut_ratio,
    MetricsReport,
};
pub use oracle::{brute_force_min_ncut, oracle_size_limit, OracleResult};
pub use spectral::{kmeans, random_partition, spectral_partition, KMEANS_RESTARTS};
