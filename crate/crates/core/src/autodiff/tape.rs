//! Tape-based reverse-mode differentiation over small dense matrices.
//!
//! A [`Tape`] records every operation as a node holding its forward value.
//! Nodes are appended in evaluation order, so the recorded graph is acyclic
//! by construction and [`Tape::backward`] can sweep it once in reverse.
//!
//! Besides the textbook primitives there are a few "grouped column" ops. The
//! GNN lays out per-user columns of all nodes (or edges) side by side, with
//! `group` consecutive columns per entity; these ops average, broadcast,
//! gather and normalize inside such groups.

use std::sync::Arc;

use super::Matrix;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddColBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine(Var, f64),
    Relu(Var),
    Ln(Var, f64),
    Sum(Var),
    SumRows(Var),
    SumCols(Var),
    ConcatRows(Var, Var),
    Reshape(Var),
    GroupMean(Var, usize),
    RepeatGroups(Var, usize),
    GatherMean {
        x: Var,
        group: usize,
        sources: Arc<[Vec<usize>]>,
    },
    GatherAdd {
        x: Var,
        bias: Var,
        group: usize,
        sources: Arc<[usize]>,
    },
    SoftmaxGroups(Var, usize),
}

#[derive(Clone, Debug)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

/// Records a computation for later differentiation. Single owner; build one
/// tape per sample when evaluating a batch concurrently.
#[derive(Default, Clone, Debug)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar root with respect to every recorded node that
/// requires them.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, or zeros of `shape` if the root does not depend on it.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Matrix {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(shape.0, shape.1))
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

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// A differentiable leaf (parameter or test input).
    pub fn var(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn unary(&mut self, value: Matrix, op: Op, x: Var) -> Var {
        let rg = self.rg(x);
        self.push(value, op, rg)
    }

    fn binary(&mut self, value: Matrix, op: Op, a: Var, b: Var) -> Var {
        let rg = self.rg(a) || self.rg(b);
        self.push(value, op, rg)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::dim(
                op,
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        Ok(())
    }

    fn check_groups(&self, op: &'static str, x: Var, group: usize) -> Result<usize> {
        let cols = self.shape(x).1;
        if group == 0 || !cols.is_multiple_of(group) {
            return Err(Error::dim(op, format!("{cols} columns in groups of {group}")));
        }
        Ok(cols / group)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.binary(value, Op::MatMul(a, b), a, b))
    }

    /// Adds the column vector `bias` (rows x 1) to every column of `m`.
    pub fn add_col_broadcast(&mut self, m: Var, bias: Var) -> Result<Var> {
        let (rows, cols) = self.shape(m);
        if self.shape(bias) != (rows, 1) {
            return Err(Error::dim(
                "add_col_broadcast",
                format!("bias {:?} for a {rows}x{cols} matrix", self.shape(bias)),
            ));
        }
        let b = self.value(bias).data().to_vec();
        let mut value = self.value(m).clone();
        for (r, br) in b.iter().enumerate() {
            for x in value.row_mut(r) {
                *x += br;
            }
        }
        Ok(self.binary(value, Op::AddColBias(m, bias), m, bias))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let mut value = self.value(a).clone();
        value.add_assign(self.value(b));
        Ok(self.binary(value, Op::Add(a, b), a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let mut value = self.value(a).clone();
        for (x, y) in value.data_mut().iter_mut().zip(self.value(b).data()) {
            *x -= y;
        }
        Ok(self.binary(value, Op::Sub(a, b), a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let mut value = self.value(a).clone();
        for (x, y) in value.data_mut().iter_mut().zip(self.value(b).data()) {
            *x *= y;
        }
        Ok(self.binary(value, Op::Mul(a, b), a, b))
    }

    /// `scale * x + shift`, elementwise.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let value = self.value(x).map(|v| scale * v + shift);
        self.unary(value, Op::Affine(x, scale), x)
    }

    pub fn mul_scalar(&mut self, x: Var, scale: f64) -> Var {
        self.affine(x, scale, 0.0)
    }

    pub fn add_scalar(&mut self, x: Var, shift: f64) -> Var {
        self.affine(x, 1.0, shift)
    }

    /// ReLU with subgradient 0 at 0.
    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| if v > 0.0 { v } else { 0.0 });
        self.unary(value, Op::Relu(x), x)
    }

    /// `ln(x + eps)`; `eps` keeps the value and slope finite at 0.
    pub fn ln(&mut self, x: Var, eps: f64) -> Var {
        let value = self.value(x).map(|v| (v + eps).ln());
        self.unary(value, Op::Ln(x, eps), x)
    }

    pub fn square(&mut self, x: Var) -> Result<Var> {
        self.mul(x, x)
    }

    /// Sum of all entries, as a 1x1 node.
    pub fn sum(&mut self, x: Var) -> Var {
        let value = Matrix::scalar(self.value(x).sum());
        self.unary(value, Op::Sum(x), x)
    }

    /// Column sums: rows x cols -> 1 x cols.
    pub fn sum_rows(&mut self, x: Var) -> Var {
        let src = self.value(x);
        let mut value = Matrix::zeros(1, src.cols());
        for r in 0..src.rows() {
            for (o, v) in value.data_mut().iter_mut().zip(src.row(r)) {
                *o += v;
            }
        }
        self.unary(value, Op::SumRows(x), x)
    }

    /// Row sums: rows x cols -> rows x 1.
    pub fn sum_cols(&mut self, x: Var) -> Var {
        let src = self.value(x);
        let value = Matrix::from_fn(src.rows(), 1, |r, _| src.row(r).iter().sum());
        self.unary(value, Op::SumCols(x), x)
    }

    /// Stacks `top` above `bottom`.
    pub fn concat_rows(&mut self, top: Var, bottom: Var) -> Result<Var> {
        let (ta, tb) = (self.value(top), self.value(bottom));
        if ta.cols() != tb.cols() {
            return Err(Error::dim(
                "concat_rows",
                format!("{:?} over {:?}", ta.shape(), tb.shape()),
            ));
        }
        let mut data = Vec::with_capacity(ta.len() + tb.len());
        data.extend_from_slice(ta.data());
        data.extend_from_slice(tb.data());
        let value = Matrix::from_vec(ta.rows() + tb.rows(), ta.cols(), data)?;
        Ok(self.binary(value, Op::ConcatRows(top, bottom), top, bottom))
    }

    /// Reinterprets the row-major data with a new shape.
    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Result<Var> {
        let src = self.value(x);
        if src.len() != rows * cols {
            return Err(Error::dim(
                "reshape",
                format!("{:?} to {rows}x{cols}", src.shape()),
            ));
        }
        let value = src.clone().reshaped(rows, cols);
        Ok(self.unary(value, Op::Reshape(x), x))
    }

    /// Mean over each run of `group` consecutive columns:
    /// rows x (G*group) -> rows x G.
    pub fn group_mean(&mut self, x: Var, group: usize) -> Result<Var> {
        let n_groups = self.check_groups("group_mean", x, group)?;
        let src = self.value(x);
        let mut value = Matrix::zeros(src.rows(), n_groups);
        for r in 0..src.rows() {
            let row = src.row(r);
            for g in 0..n_groups {
                let s: f64 = row[g * group..(g + 1) * group].iter().sum();
                value.set(r, g, s / group as f64);
            }
        }
        Ok(self.unary(value, Op::GroupMean(x, group), x))
    }

    /// Repeats every column `group` times: rows x G -> rows x (G*group).
    pub fn repeat_groups(&mut self, x: Var, group: usize) -> Result<Var> {
        if group == 0 {
            return Err(Error::dim("repeat_groups", "group size 0"));
        }
        let src = self.value(x);
        let value = Matrix::from_fn(src.rows(), src.cols() * group, |r, c| src.get(r, c / group));
        Ok(self.unary(value, Op::RepeatGroups(x, group), x))
    }

    /// Output group `j` is the mean of input groups `sources[j]`; an empty
    /// source list yields zeros. Singleton lists make this a gather.
    pub fn gather_mean(&mut self, x: Var, group: usize, sources: Arc<[Vec<usize>]>) -> Result<Var> {
        let n_in = self.check_groups("gather_mean", x, group)?;
        if let Some(bad) = sources.iter().flatten().find(|&&s| s >= n_in) {
            return Err(Error::dim("gather_mean", format!("source group {bad} of {n_in}")));
        }
        let src = self.value(x);
        let mut value = Matrix::zeros(src.rows(), sources.len() * group);
        for r in 0..src.rows() {
            let in_row = src.row(r);
            let out_row = value.row_mut(r);
            for (j, list) in sources.iter().enumerate() {
                if list.is_empty() {
                    continue;
                }
                let out = &mut out_row[j * group..(j + 1) * group];
                for &s in list {
                    for (o, v) in out.iter_mut().zip(&in_row[s * group..(s + 1) * group]) {
                        *o += v;
                    }
                }
                let inv = 1.0 / list.len() as f64;
                for o in out.iter_mut() {
                    *o *= inv;
                }
            }
        }
        Ok(self.unary(value, Op::GatherMean { x, group, sources }, x))
    }

    /// Output group `e` is input group `sources[e]` plus column `e` of `bias`
    /// added to each of its columns.
    pub fn gather_add(&mut self, x: Var, bias: Var, group: usize, sources: Arc<[usize]>) -> Result<Var> {
        let n_in = self.check_groups("gather_add", x, group)?;
        let (rows, _) = self.shape(x);
        if self.shape(bias) != (rows, sources.len()) {
            return Err(Error::dim(
                "gather_add",
                format!("bias {:?} for {} targets of {rows} rows", self.shape(bias), sources.len()),
            ));
        }
        if let Some(bad) = sources.iter().find(|&&s| s >= n_in) {
            return Err(Error::dim("gather_add", format!("source group {bad} of {n_in}")));
        }
        let (src, b) = (self.value(x), self.value(bias));
        let mut value = Matrix::zeros(rows, sources.len() * group);
        for r in 0..rows {
            let in_row = src.row(r);
            let b_row = b.row(r);
            let out_row = value.row_mut(r);
            for (e, &s) in sources.iter().enumerate() {
                let out = &mut out_row[e * group..(e + 1) * group];
                for (o, v) in out.iter_mut().zip(&in_row[s * group..(s + 1) * group]) {
                    *o = v + b_row[e];
                }
            }
        }
        Ok(self.binary(value, Op::GatherAdd { x, bias, group, sources }, x, bias))
    }

    /// Softmax over each run of `group` consecutive columns, row by row.
    pub fn softmax_groups(&mut self, x: Var, group: usize) -> Result<Var> {
        let n_groups = self.check_groups("softmax_groups", x, group)?;
        let mut value = self.value(x).clone();
        for r in 0..value.rows() {
            let row = value.row_mut(r);
            for g in 0..n_groups {
                let seg = &mut row[g * group..(g + 1) * group];
                let max = seg.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                let mut total = 0.0;
                for v in seg.iter_mut() {
                    *v = (*v - max).exp();
                    total += *v;
                }
                for v in seg.iter_mut() {
                    *v /= total;
                }
            }
        }
        Ok(self.unary(value, Op::SoftmaxGroups(x, group), x))
    }

    /// Reverse sweep from a 1x1 `root`.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let (rows, cols) = self.shape(root);
        if (rows, cols) != (1, 1) {
            return Err(Error::NonScalarRoot { rows, cols });
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; root.0 + 1];
        grads[root.0] = Some(Matrix::scalar(1.0));
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if node.requires_grad {
                self.propagate(node, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        // Only nodes that require gradients keep them.
        for (g, node) in grads.iter_mut().zip(&self.nodes) {
            if !node.requires_grad {
                *g = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Matrix>], v: Var, contribution: Matrix) {
        if !self.rg(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&contribution),
            slot @ None => *slot = Some(contribution),
        }
    }

    fn propagate(&self, node: &Node, g: &Matrix, grads: &mut [Option<Matrix>]) {
        match &node.op {
            Op::Leaf => {}
            &Op::MatMul(a, b) => {
                if self.rg(a) {
                    self.accumulate(grads, a, g.matmul_bt(self.value(b)));
                }
                if self.rg(b) {
                    self.accumulate(grads, b, self.value(a).matmul_at(g));
                }
            }
            &Op::AddColBias(m, bias) => {
                if self.rg(bias) {
                    let db = Matrix::from_fn(g.rows(), 1, |r, _| g.row(r).iter().sum());
                    self.accumulate(grads, bias, db);
                }
                self.accumulate(grads, m, g.clone());
            }
            &Op::Add(a, b) => {
                self.accumulate(grads, a, g.clone());
                self.accumulate(grads, b, g.clone());
            }
            &Op::Sub(a, b) => {
                self.accumulate(grads, a, g.clone());
                if self.rg(b) {
                    self.accumulate(grads, b, g.map(|v| -v));
                }
            }
            &Op::Mul(a, b) => {
                if self.rg(a) {
                    let mut d = g.clone();
                    for (x, y) in d.data_mut().iter_mut().zip(self.value(b).data()) {
                        *x *= y;
                    }
                    self.accumulate(grads, a, d);
                }
                if self.rg(b) {
                    let mut d = g.clone();
                    for (x, y) in d.data_mut().iter_mut().zip(self.value(a).data()) {
                        *x *= y;
                    }
                    self.accumulate(grads, b, d);
                }
            }
            &Op::Affine(x, scale) => self.accumulate(grads, x, g.map(|v| v * scale)),
            &Op::Relu(x) => {
                let mut d = g.clone();
                for (dv, y) in d.data_mut().iter_mut().zip(node.value.data()) {
                    if *y <= 0.0 {
                        *dv = 0.0;
                    }
                }
                self.accumulate(grads, x, d);
            }
            &Op::Ln(x, eps) => {
                let mut d = g.clone();
                for (dv, v) in d.data_mut().iter_mut().zip(self.value(x).data()) {
                    *dv /= v + eps;
                }
                self.accumulate(grads, x, d);
            }
            &Op::Sum(x) => {
                let (r, c) = self.shape(x);
                self.accumulate(grads, x, Matrix::filled(r, c, g.data()[0]));
            }
            &Op::SumRows(x) => {
                let (r, c) = self.shape(x);
                self.accumulate(grads, x, Matrix::from_fn(r, c, |_, j| g.get(0, j)));
            }
            &Op::SumCols(x) => {
                let (r, c) = self.shape(x);
                self.accumulate(grads, x, Matrix::from_fn(r, c, |i, _| g.get(i, 0)));
            }
            &Op::ConcatRows(top, bottom) => {
                let split = self.value(top).len();
                let cols = g.cols();
                let data = g.data();
                if self.rg(top) {
                    let t = Matrix::from_vec(split / cols.max(1), cols, data[..split].to_vec());
                    self.accumulate(grads, top, t.expect("concat split"));
                }
                if self.rg(bottom) {
                    let rows = (data.len() - split) / cols.max(1);
                    let b = Matrix::from_vec(rows, cols, data[split..].to_vec());
                    self.accumulate(grads, bottom, b.expect("concat split"));
                }
            }
            &Op::Reshape(x) => {
                let (r, c) = self.shape(x);
                self.accumulate(grads, x, g.clone().reshaped(r, c));
            }
            &Op::GroupMean(x, group) => {
                let (r, c) = self.shape(x);
                let inv = 1.0 / group as f64;
                self.accumulate(grads, x, Matrix::from_fn(r, c, |i, j| g.get(i, j / group) * inv));
            }
            &Op::RepeatGroups(x, group) => {
                let (r, c) = self.shape(x);
                let d = Matrix::from_fn(r, c, |i, j| g.row(i)[j * group..(j + 1) * group].iter().sum());
                self.accumulate(grads, x, d);
            }
            Op::GatherMean { x, group, sources } => {
                let (group, x) = (*group, *x);
                let (r, c) = self.shape(x);
                let mut d = Matrix::zeros(r, c);
                for i in 0..r {
                    let g_row = g.row(i);
                    let d_row = d.row_mut(i);
                    for (j, list) in sources.iter().enumerate() {
                        if list.is_empty() {
                            continue;
                        }
                        let inv = 1.0 / list.len() as f64;
                        let gj = &g_row[j * group..(j + 1) * group];
                        for &s in list {
                            for (o, v) in d_row[s * group..(s + 1) * group].iter_mut().zip(gj) {
                                *o += v * inv;
                            }
                        }
                    }
                }
                self.accumulate(grads, x, d);
            }
            Op::GatherAdd { x, bias, group, sources } => {
                let (group, x, bias) = (*group, *x, *bias);
                if self.rg(x) {
                    let (r, c) = self.shape(x);
                    let mut d = Matrix::zeros(r, c);
                    for i in 0..r {
                        let g_row = g.row(i);
                        let d_row = d.row_mut(i);
                        for (e, &s) in sources.iter().enumerate() {
                            let ge = &g_row[e * group..(e + 1) * group];
                            for (o, v) in d_row[s * group..(s + 1) * group].iter_mut().zip(ge) {
                                *o += v;
                            }
                        }
                    }
                    self.accumulate(grads, x, d);
                }
                if self.rg(bias) {
                    let (r, n_targets) = self.shape(bias);
                    let d = Matrix::from_fn(r, n_targets, |i, e| {
                        g.row(i)[e * group..(e + 1) * group].iter().sum()
                    });
                    self.accumulate(grads, bias, d);
                }
            }
            &Op::SoftmaxGroups(x, group) => {
                let y = &node.value;
                let mut d = g.clone();
                for i in 0..y.rows() {
                    let y_row = y.row(i);
                    let d_row = d.row_mut(i);
                    for start in (0..y_row.len()).step_by(group) {
                        let ys = &y_row[start..start + group];
                        let ds = &mut d_row[start..start + group];
                        let dot: f64 = ys.iter().zip(ds.iter()).map(|(a, b)| a * b).sum();
                        for (dv, yv) in ds.iter_mut().zip(ys) {
                            *dv = yv * (*dv - dot);
                        }
                    }
                }
                self.accumulate(grads, x, d);
            }
        }
    }
}
