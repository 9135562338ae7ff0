//! Define-by-run reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records every primitive applied during a forward pass. Each
//! recorded node keeps its forward value, so [`Tape::backward`] can walk the
//! nodes in reverse creation order (which is a topological order) and apply
//! the matching adjoint rule.
//!
//! Trainable weights live in a [`ParamStore`]; pulling one onto a tape with
//! [`Tape::param`] registers it so its gradient is reported by
//! [`Gradients::get`]. A parameter marked non-trainable enters the tape as a
//! constant, which is how gradient flow into frozen modules is stopped.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::sparse::SparseMatrix;
use crate::error::{GapError, Result};

/// Lower bound on the row norm used by [`Tape::l2_normalize_rows`].
pub const L2_NORM_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Matrix,
    pub trainable: bool,
}

/// Owned collection of named weight matrices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix, trainable: bool) -> ParamId {
        self.params.push(Parameter {
            name: name.into(),
            value,
            trainable,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.params[id.0].value
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.params[id.0].trainable = trainable;
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Order-sensitive checksum over the bit patterns of the selected
    /// parameters. Used to prove frozen weights never moved.
    pub fn checksum(&self, ids: &[ParamId]) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for id in ids {
            for v in self.value(*id).data() {
                h ^= v.to_bits();
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    SparseMatMul(Arc<SparseMatrix>, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Affine(Var, f64),
    Tanh(Var),
    Relu(Var),
    RowSoftmax(Var),
    ReduceSum(Var),
    Square(Var),
    L2NormalizeRows(Var, Vec<f64>),
    RowMaxPool(Var, Vec<usize>),
    Transpose(Var),
    ConcatCols(Var, Var),
    GatherRows(Var, Vec<usize>),
    SelectColumn(Var, usize),
    ClampMin(Var, f64),
}

struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

/// How the right operand of a binary elementwise op lines up with the left.
#[derive(Clone, Copy)]
enum Broadcast {
    Same,
    Row,
    Scalar,
}

const NO_ARGMAX: usize = usize::MAX;

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    registry: Vec<(ParamId, String)>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Value of a `1x1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        debug_assert_eq!(m.shape(), (1, 1));
        m.data()[0]
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool, name: &str) -> Result<Var> {
        if !value.is_finite() {
            return Err(GapError::NonFinite(name.to_string()));
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn constant(&mut self, value: Matrix) -> Result<Var> {
        self.push(value, Op::Constant, false, "constant")
    }

    /// Records a parameter. Frozen parameters are recorded as constants.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<Var> {
        let p = store.get(id);
        if p.trainable && !self.registry.iter().any(|(r, _)| *r == id) {
            self.registry.push((id, p.name.clone()));
        }
        let op = if p.trainable { Op::Param(id) } else { Op::Constant };
        self.push(p.value.clone(), op, p.trainable, &p.name)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::MatMul(a, b), rg, "matmul")
    }

    pub fn sparse_matmul(&mut self, s: &Arc<SparseMatrix>, x: Var) -> Result<Var> {
        let value = s.matmul_dense(self.value(x))?;
        let rg = self.rg(x);
        self.push(value, Op::SparseMatMul(Arc::clone(s), x), rg, "sparse_dense_matmul")
    }

    fn broadcast(&self, op: &'static str, a: Var, b: Var) -> Result<Broadcast> {
        let (ar, ac) = self.value(a).shape();
        let (br, bc) = self.value(b).shape();
        if (ar, ac) == (br, bc) {
            Ok(Broadcast::Same)
        } else if br == 1 && bc == ac {
            Ok(Broadcast::Row)
        } else if (br, bc) == (1, 1) {
            Ok(Broadcast::Scalar)
        } else {
            Err(GapError::shape(op, format!("{ar}x{ac} with {br}x{bc}")))
        }
    }

    fn zip_with(&self, a: Var, b: Var, mode: Broadcast, f: impl Fn(f64, f64) -> f64) -> Matrix {
        let av = self.value(a);
        let bv = self.value(b);
        let cols = av.cols();
        let data = av
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| f(x, bv.data()[broadcast_index(mode, i, cols)]))
            .collect();
        Matrix::from_raw(av.rows(), cols, data)
    }

    /// Elementwise `a + b`; `b` may be a `1 x cols` row or a `1x1` scalar,
    /// broadcast over the rows of `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let mode = self.broadcast("add", a, b)?;
        let value = self.zip_with(a, b, mode, |x, y| x + y);
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::Add(a, b), rg, "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let mode = self.broadcast("sub", a, b)?;
        let value = self.zip_with(a, b, mode, |x, y| x - y);
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::Sub(a, b), rg, "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let mode = self.broadcast("elementwise_mul", a, b)?;
        let value = self.zip_with(a, b, mode, |x, y| x * y);
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::Mul(a, b), rg, "elementwise_mul")
    }

    /// Elementwise `a / b`. No guard is applied; callers clamp denominators.
    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        let mode = self.broadcast("elementwise_div", a, b)?;
        let value = self.zip_with(a, b, mode, |x, y| x / y);
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::Div(a, b), rg, "elementwise_div")
    }

    /// `scale * a + shift`.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Result<Var> {
        let value = self.value(a).map(|x| scale * x + shift);
        let rg = self.rg(a);
        self.push(value, Op::Affine(a, scale), rg, "affine")
    }

    pub fn scale(&mut self, a: Var, scale: f64) -> Result<Var> {
        self.affine(a, scale, 0.0)
    }

    /// `1 - a`.
    pub fn one_minus(&mut self, a: Var) -> Result<Var> {
        self.affine(a, -1.0, 1.0)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(f64::tanh);
        let rg = self.rg(a);
        self.push(value, Op::Tanh(a), rg, "tanh")
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(|x| x.max(0.0));
        let rg = self.rg(a);
        self.push(value, Op::Relu(a), rg, "relu")
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(|x| x * x);
        let rg = self.rg(a);
        self.push(value, Op::Square(a), rg, "square")
    }

    pub fn row_softmax(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        if !av.is_finite() {
            return Err(GapError::NonFinite("row_softmax input".into()));
        }
        let mut value = av.clone();
        for r in 0..value.rows() {
            softmax_in_place(value.row_mut(r));
        }
        let rg = self.rg(a);
        self.push(value, Op::RowSoftmax(a), rg, "row_softmax")
    }

    pub fn reduce_sum(&mut self, a: Var) -> Result<Var> {
        let value = Matrix::scalar(self.value(a).sum());
        let rg = self.rg(a);
        self.push(value, Op::ReduceSum(a), rg, "reduce_sum")
    }

    /// Divides every row by `max(‖row‖₂, L2_NORM_FLOOR)`, so zero rows stay
    /// zero.
    pub fn l2_normalize_rows(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        let mut value = av.clone();
        let mut norms = Vec::with_capacity(av.rows());
        for r in 0..av.rows() {
            let norm = av.row(r).iter().map(|x| x * x).sum::<f64>().sqrt();
            let denom = norm.max(L2_NORM_FLOOR);
            for v in value.row_mut(r) {
                *v /= denom;
            }
            norms.push(norm);
        }
        let rg = self.rg(a);
        self.push(value, Op::L2NormalizeRows(a, norms), rg, "l2_normalize_rows")
    }

    /// Output row `i` is the elementwise maximum of the rows of `a` listed in
    /// `sets[i]`; an empty set yields a zero row.
    pub fn row_maxpool_over_sets(&mut self, a: Var, sets: &[Vec<usize>]) -> Result<Var> {
        let av = self.value(a);
        let cols = av.cols();
        let mut value = Matrix::zeros(sets.len(), cols);
        let mut argmax = vec![NO_ARGMAX; sets.len() * cols];
        for (i, set) in sets.iter().enumerate() {
            if let Some(&bad) = set.iter().find(|&&j| j >= av.rows()) {
                return Err(GapError::shape(
                    "row_maxpool_over_sets",
                    format!("row {bad} out of range for {} rows", av.rows()),
                ));
            }
            let Some((&first, rest)) = set.split_first() else {
                continue;
            };
            let out = value.row_mut(i);
            out.copy_from_slice(av.row(first));
            let arg = &mut argmax[i * cols..(i + 1) * cols];
            arg.fill(first);
            for &j in rest {
                for (c, &x) in av.row(j).iter().enumerate() {
                    if x > out[c] {
                        out[c] = x;
                        arg[c] = j;
                    }
                }
            }
        }
        let rg = self.rg(a);
        self.push(value, Op::RowMaxPool(a, argmax), rg, "row_maxpool_over_sets")
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).transpose();
        let rg = self.rg(a);
        self.push(value, Op::Transpose(a), rg, "transpose")
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rows() != bv.rows() {
            return Err(GapError::shape(
                "concat_cols",
                format!("{} rows with {} rows", av.rows(), bv.rows()),
            ));
        }
        let cols = av.cols() + bv.cols();
        let mut data = Vec::with_capacity(av.rows() * cols);
        for r in 0..av.rows() {
            data.extend_from_slice(av.row(r));
            data.extend_from_slice(bv.row(r));
        }
        let value = Matrix::from_raw(av.rows(), cols, data);
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::ConcatCols(a, b), rg, "concat_cols")
    }

    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let av = self.value(a);
        if let Some(&bad) = rows.iter().find(|&&r| r >= av.rows()) {
            return Err(GapError::shape(
                "gather_rows",
                format!("row {bad} out of range for {} rows", av.rows()),
            ));
        }
        let mut data = Vec::with_capacity(rows.len() * av.cols());
        for &r in rows {
            data.extend_from_slice(av.row(r));
        }
        let value = Matrix::from_raw(rows.len(), av.cols(), data);
        let rg = self.rg(a);
        self.push(value, Op::GatherRows(a, rows.to_vec()), rg, "gather_rows")
    }

    pub fn select_column(&mut self, a: Var, col: usize) -> Result<Var> {
        let av = self.value(a);
        if col >= av.cols() {
            return Err(GapError::shape(
                "select_column",
                format!("column {col} of {} columns", av.cols()),
            ));
        }
        let value = Matrix::from_raw(av.rows(), 1, av.column(col));
        let rg = self.rg(a);
        self.push(value, Op::SelectColumn(a, col), rg, "select_column")
    }

    /// Elementwise `max(a, floor)`; the gradient passes only where `a > floor`.
    pub fn clamp_min(&mut self, a: Var, floor: f64) -> Result<Var> {
        let value = self.value(a).map(|x| x.max(floor));
        let rg = self.rg(a);
        self.push(value, Op::ClampMin(a, floor), rg, "clamp_min")
    }

    /// Reverse sweep from a scalar output.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let (rows, cols) = self.value(output).shape();
        if (rows, cols) != (1, 1) {
            return Err(GapError::NonScalarOutput { rows, cols });
        }
        let mut grads: Vec<Option<Matrix>> = (0..=output.0).map(|_| None).collect();
        grads[output.0] = Some(Matrix::scalar(1.0));
        let mut by_param: Vec<(ParamId, Matrix)> = Vec::new();

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => match by_param.iter_mut().find(|(p, _)| p == id) {
                    Some((_, acc)) => acc.axpy(1.0, &g),
                    None => by_param.push((*id, g)),
                },
                Op::MatMul(a, b) => {
                    if self.rg(*a) {
                        let ga = g.matmul_nt(self.value(*b))?;
                        accumulate(&mut grads, *a, ga);
                    }
                    if self.rg(*b) {
                        let gb = self.value(*a).matmul_tn(&g)?;
                        accumulate(&mut grads, *b, gb);
                    }
                }
                Op::SparseMatMul(s, x) => {
                    let gx = s.transpose_matmul_dense(&g)?;
                    accumulate(&mut grads, *x, gx);
                }
                Op::Add(a, b) | Op::Sub(a, b) => {
                    let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                    if self.rg(*b) {
                        let mode = self.broadcast("add", *a, *b)?;
                        let mut gb = reduce_broadcast(&g, mode, self.value(*b));
                        if sign < 0.0 {
                            gb = gb.scaled(-1.0);
                        }
                        accumulate(&mut grads, *b, gb);
                    }
                    if self.rg(*a) {
                        accumulate(&mut grads, *a, g);
                    }
                }
                Op::Mul(a, b) => {
                    let mode = self.broadcast("elementwise_mul", *a, *b)?;
                    let (av, bv) = (self.value(*a), self.value(*b));
                    if self.rg(*a) {
                        let ga = map_with_broadcast(&g, bv, mode, |gi, y| gi * y);
                        accumulate(&mut grads, *a, ga);
                    }
                    if self.rg(*b) {
                        let full = zip_same(&g, av, |gi, x| gi * x);
                        accumulate(&mut grads, *b, reduce_broadcast(&full, mode, bv));
                    }
                }
                Op::Div(a, b) => {
                    let mode = self.broadcast("elementwise_div", *a, *b)?;
                    let bv = self.value(*b);
                    if self.rg(*a) {
                        let ga = map_with_broadcast(&g, bv, mode, |gi, y| gi / y);
                        accumulate(&mut grads, *a, ga);
                    }
                    if self.rg(*b) {
                        // d(x/y)/dy = -x/y² = -out/y
                        let out = &node.value;
                        let t = zip_same(&g, out, |gi, o| gi * o);
                        let t = map_with_broadcast(&t, bv, mode, |v, y| -v / y);
                        accumulate(&mut grads, *b, reduce_broadcast(&t, mode, bv));
                    }
                }
                Op::Affine(a, scale) => {
                    accumulate(&mut grads, *a, g.scaled(*scale));
                }
                Op::Tanh(a) => {
                    let ga = zip_same(&g, &node.value, |gi, y| gi * (1.0 - y * y));
                    accumulate(&mut grads, *a, ga);
                }
                Op::Relu(a) => {
                    let ga = zip_same(&g, self.value(*a), |gi, x| if x > 0.0 { gi } else { 0.0 });
                    accumulate(&mut grads, *a, ga);
                }
                Op::Square(a) => {
                    let ga = zip_same(&g, self.value(*a), |gi, x| 2.0 * x * gi);
                    accumulate(&mut grads, *a, ga);
                }
                Op::RowSoftmax(a) => {
                    let y = &node.value;
                    let mut ga = Matrix::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                        for ((o, &p), &q) in ga.row_mut(r).iter_mut().zip(yr).zip(gr) {
                            *o = p * (q - dot);
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::ReduceSum(a) => {
                    let (r, c) = self.value(*a).shape();
                    accumulate(&mut grads, *a, Matrix::filled(r, c, g.data()[0]));
                }
                Op::L2NormalizeRows(a, norms) => {
                    let y = &node.value;
                    let mut ga = Matrix::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let norm = norms[r];
                        if norm > L2_NORM_FLOOR {
                            let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                            for ((o, &p), &q) in ga.row_mut(r).iter_mut().zip(yr).zip(gr) {
                                *o = (q - p * dot) / norm;
                            }
                        } else {
                            for (o, &q) in ga.row_mut(r).iter_mut().zip(gr) {
                                *o = q / L2_NORM_FLOOR;
                            }
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::RowMaxPool(a, argmax) => {
                    let (r, c) = self.value(*a).shape();
                    let mut ga = Matrix::zeros(r, c);
                    let cols = g.cols();
                    for (k, &src) in argmax.iter().enumerate() {
                        if src != NO_ARGMAX {
                            let col = k % cols;
                            let cur = ga.get(src, col);
                            ga.set(src, col, cur + g.data()[k]);
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Transpose(a) => {
                    accumulate(&mut grads, *a, g.transpose());
                }
                Op::ConcatCols(a, b) => {
                    let ac = self.value(*a).cols();
                    let bc = self.value(*b).cols();
                    if self.rg(*a) {
                        let mut ga = Matrix::zeros(g.rows(), ac);
                        for r in 0..g.rows() {
                            ga.row_mut(r).copy_from_slice(&g.row(r)[..ac]);
                        }
                        accumulate(&mut grads, *a, ga);
                    }
                    if self.rg(*b) {
                        let mut gb = Matrix::zeros(g.rows(), bc);
                        for r in 0..g.rows() {
                            gb.row_mut(r).copy_from_slice(&g.row(r)[ac..]);
                        }
                        accumulate(&mut grads, *b, gb);
                    }
                }
                Op::GatherRows(a, rows) => {
                    let (r, c) = self.value(*a).shape();
                    let mut ga = Matrix::zeros(r, c);
                    for (k, &src) in rows.iter().enumerate() {
                        for (o, &v) in ga.row_mut(src).iter_mut().zip(g.row(k)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::SelectColumn(a, col) => {
                    let (r, c) = self.value(*a).shape();
                    let mut ga = Matrix::zeros(r, c);
                    for i in 0..r {
                        ga.set(i, *col, g.data()[i]);
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::ClampMin(a, floor) => {
                    let ga = zip_same(&g, self.value(*a), |gi, x| if x > *floor { gi } else { 0.0 });
                    accumulate(&mut grads, *a, ga);
                }
            }
        }

        Ok(Gradients {
            by_param,
            registry: self.registry.clone(),
        })
    }
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

#[inline]
fn broadcast_index(mode: Broadcast, i: usize, cols: usize) -> usize {
    match mode {
        Broadcast::Same => i,
        Broadcast::Row => i % cols,
        Broadcast::Scalar => 0,
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(acc) => acc.axpy(1.0, &g),
        slot @ None => *slot = Some(g),
    }
}

fn zip_same(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Matrix::from_raw(a.rows(), a.cols(), data)
}

fn map_with_broadcast(
    full: &Matrix,
    small: &Matrix,
    mode: Broadcast,
    f: impl Fn(f64, f64) -> f64,
) -> Matrix {
    let cols = full.cols();
    let data = full
        .data()
        .iter()
        .enumerate()
        .map(|(i, &x)| f(x, small.data()[broadcast_index(mode, i, cols)]))
        .collect();
    Matrix::from_raw(full.rows(), cols, data)
}

fn reduce_broadcast(full: &Matrix, mode: Broadcast, target: &Matrix) -> Matrix {
    match mode {
        Broadcast::Same => full.clone(),
        Broadcast::Row => full.column_sums(),
        Broadcast::Scalar => Matrix::scalar(full.sum()),
    }
    .reshaped_like(target)
}

impl Matrix {
    fn reshaped_like(self, target: &Matrix) -> Matrix {
        debug_assert_eq!(self.data().len(), target.data().len());
        Matrix::from_raw(target.rows(), target.cols(), self.into_data())
    }
}

/// Gradients of a scalar with respect to every registered trainable
/// parameter.
#[derive(Debug, Clone)]
pub struct Gradients {
    by_param: Vec<(ParamId, Matrix)>,
    registry: Vec<(ParamId, String)>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Result<&Matrix> {
        if let Some((_, g)) = self.by_param.iter().find(|(p, _)| *p == id) {
            return Ok(g);
        }
        match self.registry.iter().find(|(p, _)| *p == id) {
            // recorded but does not influence the output
            Some(_) => Err(GapError::UnrecordedParameter(format!(
                "param#{} (no path to output)",
                id.0
            ))),
            None => Err(GapError::UnrecordedParameter(format!("param#{}", id.0))),
        }
    }

    pub fn contains(&self, id: ParamId) -> bool {
        self.by_param.iter().any(|(p, _)| *p == id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Matrix)> {
        self.by_param.iter().map(|(p, g)| (*p, g))
    }

    /// Adds another gradient set into this one.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (id, g) in &other.by_param {
            match self.by_param.iter_mut().find(|(p, _)| p == id) {
                Some((_, acc)) => acc.axpy(1.0, g),
                None => self.by_param.push((*id, g.clone())),
            }
        }
        for entry in &other.registry {
            if !self.registry.iter().any(|(p, _)| *p == entry.0) {
                self.registry.push(entry.clone());
            }
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for (_, g) in &mut self.by_param {
            *g = g.scaled(alpha);
        }
    }
}
