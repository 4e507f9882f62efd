//! Reverse-mode gradient tape over dense matrices.
//!
//! Nodes are appended in evaluation order, so the tape is always a
//! topological order of the computation and `backward` is a single reverse
//! sweep. Leaf gradients persist across `backward` calls until
//! [`Tape::zero_grad`].

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::EPS;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Matmul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Affine(Var, f64),
    Sum(Var),
    Mean(Var),
    RowSum(Var),
    RowMean(Var),
    RowStd(Var),
    ColMean(Var),
    Sigmoid(Var),
    Relu(Var),
    Exp(Var),
    Log(Var),
    Clamp(Var, f64, f64),
    SoftmaxRows(Var),
    L2NormalizeRows(Var),
    CosineRows(Var, Var),
    GatherRows(Var, Vec<usize>),
    ConcatRows(Vec<Var>),
}

#[derive(Debug, Clone)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
    leaf_grads: Vec<Option<Matrix>>,
}

fn shape_err(op: &'static str, lhs: &Matrix, rhs: &Matrix) -> Error {
    Error::ShapeMismatch {
        op,
        lhs: lhs.shape(),
        rhs: rhs.shape(),
    }
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

    /// Drops every recorded node and gradient.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.leaf_grads.clear();
    }

    /// Drops every node recorded after the first `len`, keeping the
    /// accumulated gradients of the surviving leaves.
    pub fn truncate(&mut self, len: usize) {
        self.nodes.truncate(len);
        self.leaf_grads.truncate(len);
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Matrix) -> Result<Var> {
        self.leaf(value, true)
    }

    /// Leaf that never receives gradient.
    pub fn constant(&mut self, value: Matrix) -> Result<Var> {
        self.leaf(value, false)
    }

    fn leaf(&mut self, value: Matrix, requires_grad: bool) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFiniteResult("leaf"));
        }
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        self.leaf_grads.push(None);
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<&Matrix> {
        self.leaf_grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn zero_grad(&mut self) {
        for g in &mut self.leaf_grads {
            *g = None;
        }
    }

    fn push(&mut self, op_name: &'static str, value: Matrix, op: Op, inputs: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFiniteResult(op_name));
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        self.leaf_grads.push(None);
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        self.push("matmul", value, Op::Matmul(a, b), &[a, b])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).transpose();
        self.push("transpose", value, Op::Transpose(a), &[a])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(shape_err("add", x, y));
        }
        let value = x.zip_map(y, |p, q| p + q);
        self.push("add", value, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(shape_err("sub", x, y));
        }
        let value = x.zip_map(y, |p, q| p - q);
        self.push("sub", value, Op::Sub(a, b), &[a, b])
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(shape_err("mul", x, y));
        }
        let value = x.zip_map(y, |p, q| p * q);
        self.push("mul", value, Op::Mul(a, b), &[a, b])
    }

    /// Adds a 1 x c row vector to every row of an r x c matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (x, r) = (self.value(a), self.value(row));
        if r.rows() != 1 || r.cols() != x.cols() {
            return Err(shape_err("add_row", x, r));
        }
        let mut value = x.clone();
        for i in 0..value.rows() {
            for (o, b) in value.row_mut(i).iter_mut().zip(r.as_slice()) {
                *o += b;
            }
        }
        self.push("add_row", value, Op::AddRow(a, row), &[a, row])
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        self.affine(a, s, 0.0)
    }

    /// `s * a + shift`, elementwise.
    pub fn affine(&mut self, a: Var, s: f64, shift: f64) -> Result<Var> {
        let value = self.value(a).map(|v| s * v + shift);
        self.push("affine", value, Op::Affine(a, s), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let value = Matrix::scalar(self.value(a).sum());
        self.push("sum", value, Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let value = Matrix::scalar(x.sum() / (x.rows() * x.cols()) as f64);
        self.push("mean", value, Op::Mean(a), &[a])
    }

    /// Row sums as an r x 1 column.
    pub fn rowsum(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let data = (0..x.rows()).map(|i| x.row(i).iter().sum()).collect();
        let value = Matrix::from_vec(x.rows(), 1, data)?;
        self.push("rowsum", value, Op::RowSum(a), &[a])
    }

    pub fn rowmean(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let c = x.cols() as f64;
        let data = (0..x.rows())
            .map(|i| x.row(i).iter().sum::<f64>() / c)
            .collect();
        let value = Matrix::from_vec(x.rows(), 1, data)?;
        self.push("rowmean", value, Op::RowMean(a), &[a])
    }

    /// Population standard deviation of each row.
    pub fn rowstd(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let data = (0..x.rows()).map(|i| row_std(x.row(i))).collect();
        let value = Matrix::from_vec(x.rows(), 1, data)?;
        self.push("rowstd", value, Op::RowStd(a), &[a])
    }

    /// Column means as a 1 x c row.
    pub fn colmean(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.rows() == 0 {
            return Err(Error::EmptyGraph);
        }
        let value = x.col_mean();
        self.push("colmean", value, Op::ColMean(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(sigmoid);
        self.push("sigmoid", value, Op::Sigmoid(a), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(|v| v.max(0.0));
        self.push("relu", value, Op::Relu(a), &[a])
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(libm::exp);
        self.push("exp", value, Op::Exp(a), &[a])
    }

    /// Natural log with the argument floored at `EPS`.
    pub fn log(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(|v| libm::log(v.max(EPS)));
        self.push("log", value, Op::Log(a), &[a])
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        let value = self.value(a).map(|v| v.clamp(lo, hi));
        self.push("clamp", value, Op::Clamp(a, lo, hi), &[a])
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let mut value = self.value(a).clone();
        for i in 0..value.rows() {
            softmax_in_place(value.row_mut(i));
        }
        self.push("softmax_rows", value, Op::SoftmaxRows(a), &[a])
    }

    /// Divides each row by its norm floored at `EPS`.
    pub fn l2_normalize_rows(&mut self, a: Var) -> Result<Var> {
        let mut value = self.value(a).clone();
        for i in 0..value.rows() {
            let row = value.row_mut(i);
            let n = libm::sqrt(dot(row, row)).max(EPS);
            for v in row.iter_mut() {
                *v /= n;
            }
        }
        self.push("l2_normalize_rows", value, Op::L2NormalizeRows(a), &[a])
    }

    /// Row-wise cosine similarity as an r x 1 column, norms floored at `EPS`.
    pub fn cosine_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(shape_err("cosine_rows", x, y));
        }
        let data = (0..x.rows())
            .map(|i| crate::matrix::cosine(x.row(i), y.row(i), EPS))
            .collect();
        let value = Matrix::from_vec(x.rows(), 1, data)?;
        self.push("cosine_rows", value, Op::CosineRows(a, b), &[a, b])
    }

    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let x = self.value(a);
        if let Some(&bad) = idx.iter().find(|&&i| i >= x.rows()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                n: x.rows(),
            });
        }
        let value = x.select_rows(idx);
        self.push("gather_rows", value, Op::GatherRows(a, idx.to_vec()), &[a])
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let mats: Vec<&Matrix> = parts.iter().map(|&v| self.value(v)).collect();
        let value = Matrix::vstack(&mats)?;
        self.push("concat_rows", value, Op::ConcatRows(parts.to_vec()), parts)
    }

    /// Back-propagates from a 1x1 `loss`, adding into every reachable
    /// trainable leaf's gradient.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(Error::NotScalar(shape));
        }
        if !self.nodes[loss.0].requires_grad {
            return Err(Error::DetachedLoss);
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            if !g.is_finite() {
                return Err(Error::NonFiniteResult("backward"));
            }
            if let Op::Leaf = node.op {
                match &mut self.leaf_grads[idx] {
                    Some(acc) => acc.add_assign(&g),
                    slot @ None => *slot = Some(g),
                }
                continue;
            }
            self.propagate(idx, &g, &mut grads)?;
        }
        Ok(())
    }

    fn accumulate(&self, grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(&self, idx: usize, g: &Matrix, grads: &mut [Option<Matrix>]) -> Result<()> {
        let node = &self.nodes[idx];
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::Matmul(a, b) => {
                if self.requires_grad(*a) {
                    let ga = g.matmul_nt(self.value(*b))?;
                    self.accumulate(grads, *a, ga);
                }
                if self.requires_grad(*b) {
                    let gb = self.value(*a).matmul_tn(g)?;
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Transpose(a) => self.accumulate(grads, *a, g.transpose()),
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                let ga = g.zip_map(self.value(*b), |p, q| p * q);
                let gb = g.zip_map(self.value(*a), |p, q| p * q);
                self.accumulate(grads, *a, ga);
                self.accumulate(grads, *b, gb);
            }
            Op::AddRow(a, row) => {
                self.accumulate(grads, *a, g.clone());
                if self.requires_grad(*row) {
                    let mut gr = Matrix::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for (o, v) in gr.as_mut_slice().iter_mut().zip(g.row(i)) {
                            *o += v;
                        }
                    }
                    self.accumulate(grads, *row, gr);
                }
            }
            Op::Affine(a, s) => self.accumulate(grads, *a, g.map(|v| s * v)),
            Op::Sum(a) => {
                let (r, c) = self.shape(*a);
                self.accumulate(grads, *a, Matrix::filled(r, c, g.item()));
            }
            Op::Mean(a) => {
                let (r, c) = self.shape(*a);
                let v = g.item() / (r * c) as f64;
                self.accumulate(grads, *a, Matrix::filled(r, c, v));
            }
            Op::RowSum(a) | Op::RowMean(a) => {
                let (r, c) = self.shape(*a);
                let k = if matches!(node.op, Op::RowMean(_)) {
                    1.0 / c as f64
                } else {
                    1.0
                };
                let mut ga = Matrix::zeros(r, c);
                for i in 0..r {
                    let gi = g[(i, 0)] * k;
                    ga.row_mut(i).iter_mut().for_each(|v| *v = gi);
                }
                self.accumulate(grads, *a, ga);
            }
            Op::RowStd(a) => {
                let x = self.value(*a);
                let c = x.cols() as f64;
                let mut ga = Matrix::zeros(x.rows(), x.cols());
                for i in 0..x.rows() {
                    let row = x.row(i);
                    let mu = row.iter().sum::<f64>() / c;
                    let denom = c * y[(i, 0)].max(EPS);
                    let gi = g[(i, 0)];
                    for (o, &v) in ga.row_mut(i).iter_mut().zip(row) {
                        *o = gi * (v - mu) / denom;
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::ColMean(a) => {
                let (r, c) = self.shape(*a);
                let inv = 1.0 / r as f64;
                let mut ga = Matrix::zeros(r, c);
                for i in 0..r {
                    for (o, v) in ga.row_mut(i).iter_mut().zip(g.as_slice()) {
                        *o = v * inv;
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::Sigmoid(a) => {
                let ga = g.zip_map(y, |gv, s| gv * s * (1.0 - s));
                self.accumulate(grads, *a, ga);
            }
            Op::Relu(a) => {
                let ga = g.zip_map(self.value(*a), |gv, x| if x > 0.0 { gv } else { 0.0 });
                self.accumulate(grads, *a, ga);
            }
            Op::Exp(a) => self.accumulate(grads, *a, g.zip_map(y, |gv, e| gv * e)),
            Op::Log(a) => {
                let ga = g.zip_map(self.value(*a), |gv, x| if x > EPS { gv / x } else { 0.0 });
                self.accumulate(grads, *a, ga);
            }
            Op::Clamp(a, lo, hi) => {
                let (lo, hi) = (*lo, *hi);
                let ga = g.zip_map(self.value(*a), |gv, x| {
                    if (lo..=hi).contains(&x) {
                        gv
                    } else {
                        0.0
                    }
                });
                self.accumulate(grads, *a, ga);
            }
            Op::SoftmaxRows(a) => {
                let mut ga = Matrix::zeros(y.rows(), y.cols());
                for i in 0..y.rows() {
                    let (yr, gr) = (y.row(i), g.row(i));
                    let inner = dot(yr, gr);
                    for ((o, &yv), &gv) in ga.row_mut(i).iter_mut().zip(yr).zip(gr) {
                        *o = yv * (gv - inner);
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::L2NormalizeRows(a) => {
                let x = self.value(*a);
                let mut ga = Matrix::zeros(x.rows(), x.cols());
                for i in 0..x.rows() {
                    let n = libm::sqrt(dot(x.row(i), x.row(i)));
                    let (yr, gr) = (y.row(i), g.row(i));
                    if n > EPS {
                        let inner = dot(yr, gr);
                        for ((o, &yv), &gv) in ga.row_mut(i).iter_mut().zip(yr).zip(gr) {
                            *o = (gv - yv * inner) / n;
                        }
                    } else {
                        for (o, &gv) in ga.row_mut(i).iter_mut().zip(gr) {
                            *o = gv / EPS;
                        }
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::CosineRows(a, b) => {
                let (xa, xb) = (self.value(*a), self.value(*b));
                let mut ga = Matrix::zeros(xa.rows(), xa.cols());
                let mut gb = Matrix::zeros(xb.rows(), xb.cols());
                for i in 0..xa.rows() {
                    let (ra, rb) = (xa.row(i), xb.row(i));
                    let na = libm::sqrt(dot(ra, ra));
                    let nb = libm::sqrt(dot(rb, rb));
                    let (fa, fb) = (na.max(EPS), nb.max(EPS));
                    let c = y[(i, 0)];
                    let gi = g[(i, 0)];
                    let ka = if na > EPS { c / (na * na) } else { 0.0 };
                    let kb = if nb > EPS { c / (nb * nb) } else { 0.0 };
                    let inv = 1.0 / (fa * fb);
                    for (j, o) in ga.row_mut(i).iter_mut().enumerate() {
                        *o = gi * (rb[j] * inv - ka * ra[j]);
                    }
                    for (j, o) in gb.row_mut(i).iter_mut().enumerate() {
                        *o = gi * (ra[j] * inv - kb * rb[j]);
                    }
                }
                self.accumulate(grads, *a, ga);
                self.accumulate(grads, *b, gb);
            }
            Op::GatherRows(a, idx) => {
                let (r, c) = self.shape(*a);
                let mut ga = Matrix::zeros(r, c);
                for (k, &i) in idx.iter().enumerate() {
                    for (o, v) in ga.row_mut(i).iter_mut().zip(g.row(k)) {
                        *o += v;
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let rows = self.shape(p).0;
                    let idx: Vec<usize> = (offset..offset + rows).collect();
                    self.accumulate(grads, p, g.select_rows(&idx));
                    offset += rows;
                }
            }
        }
        Ok(())
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = libm::exp(*v - max);
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// Population standard deviation.
pub fn row_std(row: &[f64]) -> f64 {
    let n = row.len() as f64;
    let mu = row.iter().sum::<f64>() / n;
    libm::sqrt(row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n)
}
