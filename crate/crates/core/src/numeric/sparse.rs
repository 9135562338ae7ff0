use rayon::prelude::*;

use super::matrix::Matrix;
use crate::error::{GapError, Result};

/// Compressed sparse row matrix. Nonzeros within a row are stored in strictly
/// increasing column order, so iterating rows yields `(row, col)` sorted
/// entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets in any order. Duplicate
    /// positions are summed; explicit zeros are dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        for &(r, c, v) in &triplets {
            if r >= rows || c >= cols {
                return Err(GapError::shape(
                    "SparseMatrix::from_triplets",
                    format!("entry ({r}, {c}) outside {rows}x{cols}"),
                ));
            }
            if !v.is_finite() {
                return Err(GapError::NonFinite("SparseMatrix::from_triplets".into()));
            }
        }
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut row_of = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_of.push(r);
                last = Some((r, c));
            }
        }
        // drop zeros created by cancellation or given explicitly
        let mut keep_cols = Vec::with_capacity(col_idx.len());
        let mut keep_vals = Vec::with_capacity(values.len());
        for ((r, c), v) in row_of.into_iter().zip(col_idx).zip(values) {
            if v != 0.0 {
                row_ptr[r + 1] += 1;
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(SparseMatrix {
            rows,
            cols,
            row_ptr,
            col_idx: keep_cols,
            values: keep_vals,
        })
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    /// All nonzeros in `(row, col)` order.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map_or(0.0, |i| vals[i])
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && self.nonzeros().all(|(r, c, v)| self.get(c, r) == v)
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.nonzeros() {
            m.set(r, c, v);
        }
        m
    }

    pub fn transpose(&self) -> SparseMatrix {
        let triplets = self.nonzeros().map(|(r, c, v)| (c, r, v)).collect();
        SparseMatrix::from_triplets(self.cols, self.rows, triplets)
            .expect("transpose of a valid matrix is valid")
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        let kernel = |(r, out): (usize, &mut f64)| {
            let (cols, vals) = self.row(r);
            *out = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        };
        if self.rows >= 1024 {
            y.par_iter_mut().enumerate().for_each(kernel);
        } else {
            y.iter_mut().enumerate().for_each(kernel);
        }
        y
    }

    /// `self * dense`.
    pub fn matmul_dense(&self, dense: &Matrix) -> Result<Matrix> {
        if self.cols != dense.rows() {
            return Err(GapError::shape(
                "sparse_dense_matmul",
                format!(
                    "{}x{} sparse times {}x{}",
                    self.rows,
                    self.cols,
                    dense.rows(),
                    dense.cols()
                ),
            ));
        }
        let m = dense.cols();
        let mut out = vec![0.0; self.rows * m];
        let kernel = |(r, out_row): (usize, &mut [f64])| {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                for (o, &d) in out_row.iter_mut().zip(dense.row(c)) {
                    *o += v * d;
                }
            }
        };
        if m > 0 && self.rows >= 256 {
            out.par_chunks_mut(m).enumerate().for_each(kernel);
        } else if m > 0 {
            out.chunks_mut(m).enumerate().for_each(kernel);
        }
        Ok(Matrix::from_raw(self.rows, m, out))
    }

    /// `selfᵀ * dense`, without materializing the transpose.
    pub fn transpose_matmul_dense(&self, dense: &Matrix) -> Result<Matrix> {
        if self.rows != dense.rows() {
            return Err(GapError::shape(
                "sparse_dense_matmul (transposed)",
                format!(
                    "({}x{})ᵀ sparse times {}x{}",
                    self.rows,
                    self.cols,
                    dense.rows(),
                    dense.cols()
                ),
            ));
        }
        let m = dense.cols();
        let mut out = Matrix::zeros(self.cols, m);
        for (r, c, v) in self.nonzeros() {
            let src = dense.row(r);
            for (o, &d) in out.row_mut(c).iter_mut().zip(src) {
                *o += v * d;
            }
        }
        Ok(out)
    }
}
