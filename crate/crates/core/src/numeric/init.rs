use rand::Rng;

use super::matrix::Matrix;
use crate::rng::seeded;

/// Glorot/Xavier uniform initialization: entries drawn from
/// `U[-sqrt(6/(rows+cols)), sqrt(6/(rows+cols))]`.
pub fn xavier_init(rows: usize, cols: usize, seed: u64) -> Matrix {
    assert!(rows > 0 && cols > 0, "xavier_init needs positive dimensions");
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let mut rng = seeded(seed);
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    Matrix::from_raw(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounded_and_deterministic() {
        let a = xavier_init(3, 3, 11);
        assert!(a.data().iter().all(|v| v.abs() <= 1.0));
        assert_eq!(a, xavier_init(3, 3, 11));
        assert_ne!(a, xavier_init(3, 3, 12));
    }

    #[test]
    fn large_sample_mean_near_zero() {
        // U[-b, b] with b = sqrt(6/1024): sd = b/sqrt(3) ≈ 0.0442, so the
        // mean of 262,144 draws has sd ≈ 8.6e-5; 0.01 is > 100 sd away.
        let a = xavier_init(512, 512, 3);
        let mean = a.sum() / a.data().len() as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        let bound = (6.0f64 / 1024.0).sqrt();
        assert!(a.data().iter().all(|v| v.abs() <= bound));
    }
}
