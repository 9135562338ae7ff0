//! Shared fixtures for the benchmarks.

pub use gap_core;

use gap_core::graph::erdos_renyi;
use gap_core::rng::seeded;
use gap_core::{Graph, Matrix};
use rand::Rng;

/// ER graph with average degree about `degree`.
pub fn er(n: usize, degree: f64, seed: u64) -> Graph {
    erdos_renyi(n, (degree / (n - 1) as f64).min(1.0), seed).expect("valid generator parameters")
}

/// Random row-stochastic `n x g` matrix.
pub fn soft_assignment(n: usize, g: usize, seed: u64) -> Matrix {
    let mut rng = seeded(seed);
    let mut y = Matrix::zeros(n, g);
    for r in 0..n {
        let row: Vec<f64> = (0..g).map(|_| rng.random_range(0.01..1.0)).collect();
        let z: f64 = row.iter().sum();
        for (c, v) in row.iter().enumerate() {
            y.set(r, c, v / z);
        }
    }
    y
}
