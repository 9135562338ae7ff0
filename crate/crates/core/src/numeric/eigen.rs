//! Symmetric eigensolver: Lanczos with full reorthogonalization.
//!
//! The Krylov basis is grown one vector at a time and kept orthonormal by two
//! rounds of classical Gram-Schmidt. When the recurrence breaks down (an
//! invariant subspace has been found) the basis is restarted with a fresh
//! random vector orthogonal to everything found so far, which is what lets
//! repeated eigenvalues (e.g. the zero eigenvalue of a disconnected graph's
//! Laplacian) show up with their full multiplicity. Ritz pairs are extracted
//! from the tridiagonal projection at geometrically spaced basis sizes and
//! accepted once every wanted pair has an explicit residual within tolerance.

use rand::Rng;
use rayon::prelude::*;

use super::sparse::SparseMatrix;
use crate::error::{GapError, Result};
use crate::rng::seeded;

/// Symmetric linear map `x ↦ M x`.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    fn apply(&self, x: &[f64]) -> Vec<f64>;

    /// Norm used to scale the residual tolerance. For explicit matrices this
    /// is the Frobenius norm.
    fn norm_scale(&self) -> f64;
}

impl LinearOperator for SparseMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matvec(x)
    }

    fn norm_scale(&self) -> f64 {
        self.frobenius_norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    Smallest,
    Largest,
}

#[derive(Clone, Copy, Debug)]
pub struct EigenOptions {
    pub seed: u64,
    /// Residual tolerance relative to [`LinearOperator::norm_scale`].
    pub tolerance: f64,
    /// Maximum operator applications; `None` means `10 * n`.
    pub max_iterations: Option<usize>,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            seed: 0,
            tolerance: 1e-6,
            max_iterations: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
}

/// `k` extreme eigenpairs of a symmetric sparse matrix, sorted by eigenvalue.
pub fn symmetric_eigs(m: &SparseMatrix, k: usize, which: Which, seed: u64) -> Result<Vec<EigenPair>> {
    if !m.is_symmetric() {
        return Err(GapError::InvalidArgument(
            "symmetric_eigs requires a symmetric matrix".into(),
        ));
    }
    symmetric_eigs_with(
        m,
        k,
        which,
        EigenOptions {
            seed,
            ..EigenOptions::default()
        },
    )
}

pub fn symmetric_eigs_with(
    op: &dyn LinearOperator,
    k: usize,
    which: Which,
    opts: EigenOptions,
) -> Result<Vec<EigenPair>> {
    let n = op.dim();
    if k > n {
        return Err(GapError::InvalidArgument(format!(
            "requested {k} eigenpairs of a {n}x{n} operator"
        )));
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let scale = op.norm_scale();
    let tol = opts.tolerance * scale.max(f64::MIN_POSITIVE);
    if scale == 0.0 {
        // zero operator: any orthonormal basis is an eigenbasis
        return Ok((0..k)
            .map(|i| {
                let mut v = vec![0.0; n];
                v[i] = 1.0;
                EigenPair { value: 0.0, vector: v }
            })
            .collect());
    }
    let max_iter = opts.max_iterations.unwrap_or(10 * n).max(k);
    let mut rng = seeded(opts.seed);

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    // beta[j] couples basis vectors j and j+1
    let mut beta: Vec<f64> = Vec::new();
    let mut applications = 0usize;

    let mut start = random_unit(&mut rng, n, &basis);
    let mut next_check = n.min((2 * k + 10).max(20));
    let mut last_residual = f64::INFINITY;

    loop {
        let v = start.take().ok_or_else(|| GapError::NoConvergence {
            iterations: applications,
            residual: last_residual,
            tolerance: tol,
        })?;
        basis.push(v);
        let j = basis.len() - 1;
        let mut w = op.apply(&basis[j]);
        applications += 1;
        let a = dot(&w, &basis[j]);
        alpha.push(a);
        reorthogonalize(&mut w, &basis);
        reorthogonalize(&mut w, &basis);
        let b = norm(&w);

        let full = basis.len() == n;
        if !full {
            if b > 1e-10 * scale {
                for x in w.iter_mut() {
                    *x /= b;
                }
                beta.push(b);
                start = Some(w);
            } else {
                beta.push(0.0);
                start = random_unit(&mut rng, n, &basis);
            }
        }

        if basis.len() >= next_check || full || start.is_none() {
            let m = basis.len();
            let (values, vectors) = tridiagonal_eigen(&alpha, &beta[..m - 1]);
            let order = wanted(&values, k, which);
            let trailing = if full { 0.0 } else { *beta.last().unwrap_or(&0.0) };
            let estimates_ok = order
                .iter()
                .all(|&i| (trailing * vectors[i * m + m - 1]).abs() <= tol);
            if estimates_ok {
                let pairs = ritz_pairs(&basis, &values, &vectors, &order);
                last_residual = pairs
                    .iter()
                    .map(|p| residual(op, p))
                    .fold(0.0, f64::max);
                if last_residual <= tol {
                    let mut pairs = pairs;
                    pairs.sort_by(|a, b| a.value.total_cmp(&b.value));
                    return Ok(pairs);
                }
            }
            if full {
                return Err(GapError::NoConvergence {
                    iterations: applications,
                    residual: last_residual,
                    tolerance: tol,
                });
            }
            next_check = n.min(m + m / 2 + 10);
        }
        if applications >= max_iter {
            return Err(GapError::NoConvergence {
                iterations: applications,
                residual: last_residual,
                tolerance: tol,
            });
        }
    }
}

fn wanted(values: &[f64], k: usize, which: Which) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    if which == Which::Largest {
        idx.reverse();
    }
    idx.truncate(k);
    idx
}

fn ritz_pairs(basis: &[Vec<f64>], values: &[f64], vectors: &[f64], order: &[usize]) -> Vec<EigenPair> {
    let m = basis.len();
    let n = basis[0].len();
    order
        .iter()
        .map(|&i| {
            let mut x = vec![0.0; n];
            for (j, b) in basis.iter().enumerate() {
                let c = vectors[i * m + j];
                for (xv, bv) in x.iter_mut().zip(b) {
                    *xv += c * bv;
                }
            }
            let nrm = norm(&x);
            for v in x.iter_mut() {
                *v /= nrm;
            }
            canonical_sign(&mut x);
            EigenPair {
                value: values[i],
                vector: x,
            }
        })
        .collect()
}

/// Flips the vector so its largest-magnitude entry (first on ties) is
/// positive.
fn canonical_sign(x: &mut [f64]) {
    let mut best = 0usize;
    for (i, v) in x.iter().enumerate() {
        if v.abs() > x[best].abs() + 1e-12 {
            best = i;
        }
    }
    if x[best] < 0.0 {
        for v in x.iter_mut() {
            *v = -*v;
        }
    }
}

pub(crate) fn residual(op: &dyn LinearOperator, p: &EigenPair) -> f64 {
    let mv = op.apply(&p.vector);
    mv.iter()
        .zip(&p.vector)
        .map(|(a, b)| (a - p.value * b).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn random_unit(rng: &mut crate::rng::Rng, n: usize, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        reorthogonalize(&mut v, basis);
        reorthogonalize(&mut v, basis);
        let nrm = norm(&v);
        if nrm > 1e-8 {
            for x in v.iter_mut() {
                *x /= nrm;
            }
            return Some(v);
        }
    }
    None
}

/// One pass of classical Gram-Schmidt against the whole basis.
fn reorthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    if basis.is_empty() {
        return;
    }
    let coeffs: Vec<f64> = if w.len() * basis.len() > 1 << 16 {
        basis.par_iter().map(|b| dot(w, b)).collect()
    } else {
        basis.iter().map(|b| dot(w, b)).collect()
    };
    let subtract = |(i, x): (usize, &mut f64)| {
        let mut acc = 0.0;
        for (c, b) in coeffs.iter().zip(basis) {
            acc += c * b[i];
        }
        *x -= acc;
    };
    if w.len() * basis.len() > 1 << 16 {
        w.par_iter_mut().enumerate().for_each(subtract);
    } else {
        w.iter_mut().enumerate().for_each(subtract);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Eigen-decomposition of the symmetric tridiagonal matrix with diagonal
/// `diag` and off-diagonal `off` by implicit QL iterations.
///
/// Returns `(values, vectors)` where eigenvector `i` occupies
/// `vectors[i*m .. (i+1)*m]`.
pub(crate) fn tridiagonal_eigen(diag: &[f64], off: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; m];
    e[..m.saturating_sub(1)].copy_from_slice(&off[..m.saturating_sub(1)]);
    // z[i][k]: row i of the accumulated rotation, column k = eigenvector k
    let mut z = vec![0.0; m * m];
    for i in 0..m {
        z[i * m + i] = 1.0;
    }

    for l in 0..m {
        let mut iter = 0;
        loop {
            let mut mm = l;
            while mm + 1 < m {
                let dd = d[mm].abs() + d[mm + 1].abs();
                if e[mm].abs() <= f64::EPSILON * dd {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[mm] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = mm;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[mm] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..m {
                    let zi1 = z[k * m + i + 1];
                    let zi = z[k * m + i];
                    z[k * m + i + 1] = s * zi + c * zi1;
                    z[k * m + i] = c * zi - s * zi1;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[mm] = 0.0;
        }
    }

    let mut vectors = vec![0.0; m * m];
    for k in 0..m {
        for i in 0..m {
            vectors[k * m + i] = z[i * m + k];
        }
    }
    (d, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_laplacian(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n - 1 {
            t.push((i, i + 1, -1.0));
            t.push((i + 1, i, -1.0));
            t.push((i, i, 1.0));
            t.push((i + 1, i + 1, 1.0));
        }
        SparseMatrix::from_triplets(n, n, t).unwrap()
    }

    #[test]
    fn tridiagonal_matches_known_spectrum() {
        // tridiag(-1, 2, -1) of size 5: λ_j = 2 - 2 cos(jπ/6)
        let (mut vals, _) = tridiagonal_eigen(&[2.0; 5], &[-1.0; 4]);
        vals.sort_by(f64::total_cmp);
        for (j, v) in vals.iter().enumerate() {
            let expect = 2.0 - 2.0 * ((j + 1) as f64 * std::f64::consts::PI / 6.0).cos();
            assert!((v - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_eigenvalues() {
        let id = SparseMatrix::identity(6);
        let pairs = symmetric_eigs(&id, 3, Which::Largest, 1).unwrap();
        assert_eq!(pairs.len(), 3);
        for p in &pairs {
            assert!((p.value - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_null_space_is_constant() {
        let l = path_laplacian(7);
        let pairs = symmetric_eigs(&l, 2, Which::Smallest, 3).unwrap();
        assert!(pairs[0].value.abs() < 1e-9);
        let c = 1.0 / 7f64.sqrt();
        for v in &pairs[0].vector {
            assert!((v - c).abs() < 1e-8);
        }
    }

    #[test]
    fn repeated_eigenvalue_found_with_multiplicity() {
        // two disjoint edges: Laplacian eigenvalues {0, 0, 2, 2}
        let l = SparseMatrix::from_triplets(
            4,
            4,
            vec![
                (0, 0, 1.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 1.0),
                (2, 2, 1.0), (2, 3, -1.0), (3, 2, -1.0), (3, 3, 1.0),
            ],
        )
        .unwrap();
        let pairs = symmetric_eigs(&l, 2, Which::Smallest, 9).unwrap();
        assert!(pairs[0].value.abs() < 1e-9 && pairs[1].value.abs() < 1e-9);
        let d = dot(&pairs[0].vector, &pairs[1].vector);
        assert!(d.abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_requests() {
        let l = path_laplacian(3);
        assert!(symmetric_eigs(&l, 4, Which::Smallest, 0).is_err());
        let asym = SparseMatrix::from_triplets(2, 2, vec![(0, 1, 1.0)]).unwrap();
        assert!(symmetric_eigs(&asym, 1, Which::Smallest, 0).is_err());
    }
}
