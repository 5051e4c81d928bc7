//! Reverse-mode tape over dense matrices.
//!
//! A [`Tape`] lives for one forward/backward pass. Parameters enter as
//! cached leaves keyed by [`ParamId`]; everything else is either a constant
//! or the output of a recorded op. Nodes that do not depend on any
//! parameter are skipped during the backward sweep.

use super::params::{Grads, ParamId, ParamStore};
use super::tensor::{gemm, Tensor2};
use crate::error::{Error, Result};

/// Index of a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Cos(Var),
    Abs(Var),
    Elu(Var),
    Square(Var),
    HCat(Vec<Var>),
    VCat(Vec<Var>),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    Reshape(Var),
    SoftmaxRows(Var),
    Sum(Var),
    PickCols(Var, Vec<usize>),
    RowBmm(Var, Var),
    RowDot(Var, Var),
    GroupAttention {
        q: Var,
        k: Var,
        v: Var,
        groups: Vec<Vec<usize>>,
        alpha: Vec<Vec<f64>>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor2,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<Option<Var>>,
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

    pub fn value(&self, v: Var) -> &Tensor2 {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor2, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn constant(&mut self, value: Tensor2) -> Var {
        self.push(value, Op::Constant, false)
    }

    /// Leaf for a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if self.params.len() <= id.0 {
            self.params.resize(id.0 + 1, None);
        }
        if let Some(v) = self.params[id.0] {
            return v;
        }
        let v = self.push(store.get(id).clone(), Op::Param(id), true);
        self.params[id.0] = Some(v);
        v
    }

    /// Constant copy of `v`'s current value (gradient stops here).
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.constant(value)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::MatMul(a, b), ng))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        let ng = self.ng(a);
        self.push(value, Op::Transpose(a), ng)
    }

    fn binary(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor2> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(Error::dim(name, x.shape(), y.shape()));
        }
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| f(p, q)).collect();
        Tensor2::from_vec(x.rows(), x.cols(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.binary("add", a, b, |p, q| p + q)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.binary("sub", a, b, |p, q| p - q)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::Sub(a, b), ng))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.binary("mul", a, b, |p, q| p * q)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::Mul(a, b), ng))
    }

    /// Adds a `1 × c` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (x, r) = (self.value(a), self.value(row));
        if r.rows() != 1 || r.cols() != x.cols() {
            return Err(Error::dim("add_row", x.shape(), r.shape()));
        }
        let mut value = x.clone();
        for i in 0..value.rows() {
            for (v, b) in value.row_mut(i).iter_mut().zip(r.data()) {
                *v += b;
            }
        }
        let ng = self.ng(a) || self.ng(row);
        Ok(self.push(value, Op::AddRow(a, row), ng))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).map(|x| x * s);
        let ng = self.ng(a);
        self.push(value, Op::Scale(a, s), ng)
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let value = self.value(a).map(f);
        let ng = self.ng(a);
        self.push(value, op, ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        self.unary(a, |x| if x >= 0.0 { x } else { slope * x }, Op::LeakyRelu(a, slope))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn cos(&mut self, a: Var) -> Var {
        self.unary(a, f64::cos, Op::Cos(a))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.unary(a, f64::abs, Op::Abs(a))
    }

    pub fn elu(&mut self, a: Var) -> Var {
        self.unary(a, |x| if x > 0.0 { x } else { x.exp_m1() }, Op::Elu(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, |x| x * x, Op::Square(a))
    }

    /// Column-wise concatenation.
    pub fn hcat(&mut self, parts: &[Var]) -> Result<Var> {
        let refs: Vec<&Tensor2> = parts.iter().map(|&p| self.value(p)).collect();
        let value = Tensor2::hcat(&refs)?;
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(value, Op::HCat(parts.to_vec()), ng))
    }

    /// Row-wise concatenation.
    pub fn vcat(&mut self, parts: &[Var]) -> Result<Var> {
        let refs: Vec<&Tensor2> = parts.iter().map(|&p| self.value(p)).collect();
        let value = Tensor2::vcat(&refs)?;
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(value, Op::VCat(parts.to_vec()), ng))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let x = self.value(a);
        if start + len > x.rows() {
            return Err(Error::dim("slice_rows", x.shape(), (start, len)));
        }
        let value = x.slice_rows(start, len);
        let ng = self.ng(a);
        Ok(self.push(value, Op::SliceRows(a, start), ng))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let x = self.value(a);
        if start + len > x.cols() {
            return Err(Error::dim("slice_cols", x.shape(), (start, len)));
        }
        let mut value = Tensor2::zeros(x.rows(), len);
        for r in 0..x.rows() {
            value.row_mut(r).copy_from_slice(&x.row(r)[start..start + len]);
        }
        let ng = self.ng(a);
        Ok(self.push(value, Op::SliceCols(a, start), ng))
    }

    /// Reinterprets the row-major buffer with a new shape.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let x = self.value(a);
        if rows * cols != x.len() {
            return Err(Error::dim("reshape", x.shape(), (rows, cols)));
        }
        let value = Tensor2::from_vec(rows, cols, x.data().to_vec())?;
        let ng = self.ng(a);
        Ok(self.push(value, Op::Reshape(a), ng))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.cols() == 0 {
            return Err(Error::Domain("softmax of an empty row".into()));
        }
        let mut value = x.clone();
        for r in 0..value.rows() {
            softmax_in_place(value.row_mut(r));
        }
        let ng = self.ng(a);
        Ok(self.push(value, Op::SoftmaxRows(a), ng))
    }

    /// Sum of all entries as a `1 × 1` node.
    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor2::row_vector(vec![self.value(a).sum()]);
        let ng = self.ng(a);
        self.push(value, Op::Sum(a), ng)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len().max(1) as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Picks column `idx[r]` from each row `r`, giving an `r × 1` column.
    pub fn pick_cols(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let x = self.value(a);
        if idx.len() != x.rows() {
            return Err(Error::dim("pick_cols", x.shape(), (idx.len(), 1)));
        }
        if let Some(&bad) = idx.iter().find(|&&c| c >= x.cols()) {
            return Err(Error::Domain(format!("column {bad} out of range for {:?}", x.shape())));
        }
        let data = idx.iter().enumerate().map(|(r, &c)| x.get(r, c)).collect();
        let value = Tensor2::from_vec(idx.len(), 1, data)?;
        let ng = self.ng(a);
        Ok(self.push(value, Op::PickCols(a, idx.to_vec()), ng))
    }

    /// Per-row vector-matrix product: row `b` of `q` (`1 × n`) times row `b`
    /// of `w` viewed as an `n × e` matrix.
    pub fn row_bmm(&mut self, q: Var, w: Var) -> Result<Var> {
        let (x, m) = (self.value(q), self.value(w));
        let (b, n) = x.shape();
        if m.rows() != b || n == 0 || m.cols() % n != 0 {
            return Err(Error::dim("row_bmm", x.shape(), m.shape()));
        }
        let e = m.cols() / n;
        let mut value = Tensor2::zeros(b, e);
        for r in 0..b {
            let (qr, wr) = (x.row(r), m.row(r));
            let out = value.row_mut(r);
            for (k, &qk) in qr.iter().enumerate() {
                for (o, &wv) in out.iter_mut().zip(&wr[k * e..(k + 1) * e]) {
                    *o += qk * wv;
                }
            }
        }
        let ng = self.ng(q) || self.ng(w);
        Ok(self.push(value, Op::RowBmm(q, w), ng))
    }

    /// Row-wise dot product giving an `r × 1` column.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(Error::dim("row_dot", x.shape(), y.shape()));
        }
        let data = (0..x.rows())
            .map(|r| x.row(r).iter().zip(y.row(r)).map(|(p, q)| p * q).sum())
            .collect();
        let value = Tensor2::from_vec(x.rows(), 1, data)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::RowDot(a, b), ng))
    }

    /// Single-head attention where query row `r` attends over the key/value
    /// rows listed in `groups[r]`. Rows with an empty group get a zero message.
    pub fn group_attention(&mut self, q: Var, k: Var, v: Var, groups: Vec<Vec<usize>>) -> Result<Var> {
        let (vq, vk, vv) = (self.value(q), self.value(k), self.value(v));
        if groups.len() != vq.rows() || vk.cols() != vq.cols() || vk.rows() != vv.rows() {
            return Err(Error::dim("group_attention", vq.shape(), vk.shape()));
        }
        if let Some(&bad) = groups.iter().flatten().find(|&&j| j >= vk.rows()) {
            return Err(Error::Domain(format!("attention index {bad} out of range for {} keys", vk.rows())));
        }
        let mut value = Tensor2::zeros(vq.rows(), vv.cols());
        let mut alpha = Vec::with_capacity(groups.len());
        for (r, group) in groups.iter().enumerate() {
            if group.is_empty() {
                alpha.push(Vec::new());
                continue;
            }
            let qr = vq.row(r);
            let mut a: Vec<f64> = group
                .iter()
                .map(|&j| qr.iter().zip(vk.row(j)).map(|(x, y)| x * y).sum())
                .collect();
            softmax_in_place(&mut a);
            let out = value.row_mut(r);
            for (&j, &w) in group.iter().zip(&a) {
                for (o, x) in out.iter_mut().zip(vv.row(j)) {
                    *o += w * x;
                }
            }
            alpha.push(a);
        }
        let ng = self.ng(q) || self.ng(k) || self.ng(v);
        Ok(self.push(value, Op::GroupAttention { q, k, v, groups, alpha }, ng))
    }

    /// Attention weights recorded by [`Tape::group_attention`].
    pub fn attention_weights(&self, v: Var) -> Option<&[Vec<f64>]> {
        match &self.nodes[v.0].op {
            Op::GroupAttention { alpha, .. } => Some(alpha),
            _ => None,
        }
    }

    /// Gradient of `sum(output)` with respect to every parameter in `store`.
    pub fn backward(&self, output: Var, store: &ParamStore) -> Result<Grads> {
        let mut grads = Grads::zeros_for(store);
        let mut adj: Vec<Option<Tensor2>> = Vec::with_capacity(output.0 + 1);
        adj.resize_with(output.0 + 1, || None);
        let (r, c) = self.shape(output);
        adj[output.0] = Some(Tensor2::filled(r, c, 1.0));

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = adj[idx].take() else { continue };
            let y = &node.value;
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    if id.0 >= grads.len() {
                        return Err(Error::Consistency(format!("parameter {} not in store", id.0)));
                    }
                    grads.get_mut(*id).add_assign(&g);
                }
                Op::MatMul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    if self.ng(*a) {
                        let ga = slot(&mut adj, *a, va.shape());
                        gemm(false, true, &g, vb, ga, 1.0);
                    }
                    if self.ng(*b) {
                        let gb = slot(&mut adj, *b, vb.shape());
                        gemm(true, false, va, &g, gb, 1.0);
                    }
                }
                Op::Transpose(a) => self.acc(&mut adj, *a, &g.transpose()),
                Op::Add(a, b) => {
                    self.acc(&mut adj, *a, &g);
                    self.acc(&mut adj, *b, &g);
                }
                Op::Sub(a, b) => {
                    self.acc(&mut adj, *a, &g);
                    self.acc(&mut adj, *b, &g.map(|x| -x));
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    if self.ng(*a) {
                        let d = zip(&g, vb, |g, y| g * y);
                        self.acc(&mut adj, *a, &d);
                    }
                    if self.ng(*b) {
                        let d = zip(&g, va, |g, x| g * x);
                        self.acc(&mut adj, *b, &d);
                    }
                }
                Op::AddRow(a, row) => {
                    self.acc(&mut adj, *a, &g);
                    if self.ng(*row) {
                        let mut s = Tensor2::zeros(1, g.cols());
                        for r in 0..g.rows() {
                            for (acc, v) in s.data_mut().iter_mut().zip(g.row(r)) {
                                *acc += v;
                            }
                        }
                        self.acc(&mut adj, *row, &s);
                    }
                }
                Op::Scale(a, s) => self.acc(&mut adj, *a, &g.map(|x| x * s)),
                Op::Relu(a) => {
                    let d = zip(&g, self.value(*a), |g, x| if x > 0.0 { g } else { 0.0 });
                    self.acc(&mut adj, *a, &d);
                }
                Op::LeakyRelu(a, slope) => {
                    let d = zip(&g, self.value(*a), |g, x| if x >= 0.0 { g } else { slope * g });
                    self.acc(&mut adj, *a, &d);
                }
                Op::Sigmoid(a) => self.acc(&mut adj, *a, &zip(&g, y, |g, y| g * y * (1.0 - y))),
                Op::Tanh(a) => self.acc(&mut adj, *a, &zip(&g, y, |g, y| g * (1.0 - y * y))),
                Op::Cos(a) => {
                    let d = zip(&g, self.value(*a), |g, x| -g * x.sin());
                    self.acc(&mut adj, *a, &d);
                }
                Op::Abs(a) => {
                    let d = zip(&g, self.value(*a), |g, x| {
                        if x > 0.0 {
                            g
                        } else if x < 0.0 {
                            -g
                        } else {
                            0.0
                        }
                    });
                    self.acc(&mut adj, *a, &d);
                }
                Op::Elu(a) => {
                    let d = zip(&g, y, |g, y| if y > 0.0 { g } else { g * (y + 1.0) });
                    self.acc(&mut adj, *a, &d);
                }
                Op::Square(a) => {
                    let d = zip(&g, self.value(*a), |g, x| 2.0 * g * x);
                    self.acc(&mut adj, *a, &d);
                }
                Op::HCat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let cols = self.value(p).cols();
                        if self.ng(p) {
                            let dst = slot(&mut adj, p, (g.rows(), cols));
                            for r in 0..g.rows() {
                                for (d, v) in dst.row_mut(r).iter_mut().zip(&g.row(r)[off..off + cols]) {
                                    *d += v;
                                }
                            }
                        }
                        off += cols;
                    }
                }
                Op::VCat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let shape = self.value(p).shape();
                        if self.ng(p) {
                            let dst = slot(&mut adj, p, shape);
                            let src = &g.data()[off * g.cols()..(off + shape.0) * g.cols()];
                            for (d, v) in dst.data_mut().iter_mut().zip(src) {
                                *d += v;
                            }
                        }
                        off += shape.0;
                    }
                }
                Op::SliceRows(a, start) => {
                    let shape = self.value(*a).shape();
                    let dst = slot(&mut adj, *a, shape);
                    let cols = shape.1;
                    let region = &mut dst.data_mut()[start * cols..(start + g.rows()) * cols];
                    for (d, v) in region.iter_mut().zip(g.data()) {
                        *d += v;
                    }
                }
                Op::SliceCols(a, start) => {
                    let shape = self.value(*a).shape();
                    let dst = slot(&mut adj, *a, shape);
                    for r in 0..g.rows() {
                        for (d, v) in dst.row_mut(r)[*start..start + g.cols()].iter_mut().zip(g.row(r)) {
                            *d += v;
                        }
                    }
                }
                Op::Reshape(a) => {
                    let (rows, cols) = self.value(*a).shape();
                    let d = Tensor2::from_vec(rows, cols, g.data().to_vec())?;
                    self.acc(&mut adj, *a, &d);
                }
                Op::SoftmaxRows(a) => {
                    let mut d = Tensor2::zeros(g.rows(), g.cols());
                    for r in 0..g.rows() {
                        let dot: f64 = g.row(r).iter().zip(y.row(r)).map(|(g, y)| g * y).sum();
                        for ((o, gv), yv) in d.row_mut(r).iter_mut().zip(g.row(r)).zip(y.row(r)) {
                            *o = yv * (gv - dot);
                        }
                    }
                    self.acc(&mut adj, *a, &d);
                }
                Op::Sum(a) => {
                    let (rows, cols) = self.value(*a).shape();
                    self.acc(&mut adj, *a, &Tensor2::filled(rows, cols, g.get(0, 0)));
                }
                Op::PickCols(a, idx) => {
                    let shape = self.value(*a).shape();
                    let dst = slot(&mut adj, *a, shape);
                    for (r, &c) in idx.iter().enumerate() {
                        let v = dst.get(r, c) + g.get(r, 0);
                        dst.set(r, c, v);
                    }
                }
                Op::RowBmm(q, w) => {
                    let (vq, vw) = (self.value(*q), self.value(*w));
                    let n = vq.cols();
                    let e = g.cols();
                    if self.ng(*q) {
                        let mut d = Tensor2::zeros(vq.rows(), n);
                        for r in 0..vq.rows() {
                            for k in 0..n {
                                let wk = &vw.row(r)[k * e..(k + 1) * e];
                                let s: f64 = wk.iter().zip(g.row(r)).map(|(a, b)| a * b).sum();
                                d.set(r, k, s);
                            }
                        }
                        self.acc(&mut adj, *q, &d);
                    }
                    if self.ng(*w) {
                        let mut d = Tensor2::zeros(vw.rows(), vw.cols());
                        for r in 0..vq.rows() {
                            for k in 0..n {
                                let qk = vq.get(r, k);
                                for (o, gv) in d.row_mut(r)[k * e..(k + 1) * e].iter_mut().zip(g.row(r)) {
                                    *o = qk * gv;
                                }
                            }
                        }
                        self.acc(&mut adj, *w, &d);
                    }
                }
                Op::RowDot(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    if self.ng(*a) {
                        let mut d = vb.clone();
                        for r in 0..d.rows() {
                            let s = g.get(r, 0);
                            d.row_mut(r).iter_mut().for_each(|x| *x *= s);
                        }
                        self.acc(&mut adj, *a, &d);
                    }
                    if self.ng(*b) {
                        let mut d = va.clone();
                        for r in 0..d.rows() {
                            let s = g.get(r, 0);
                            d.row_mut(r).iter_mut().for_each(|x| *x *= s);
                        }
                        self.acc(&mut adj, *b, &d);
                    }
                }
                Op::GroupAttention { q, k, v, groups, alpha } => {
                    let (vq, vk, vv) = (self.value(*q), self.value(*k), self.value(*v));
                    let mut dq = Tensor2::zeros(vq.rows(), vq.cols());
                    let mut dk = Tensor2::zeros(vk.rows(), vk.cols());
                    let mut dv = Tensor2::zeros(vv.rows(), vv.cols());
                    for (r, (group, a)) in groups.iter().zip(alpha).enumerate() {
                        let gr = g.row(r);
                        let da: Vec<f64> = group
                            .iter()
                            .map(|&j| gr.iter().zip(vv.row(j)).map(|(x, y)| x * y).sum())
                            .collect();
                        let mean: f64 = a.iter().zip(&da).map(|(x, y)| x * y).sum();
                        for ((&j, &w), &d) in group.iter().zip(a).zip(&da) {
                            for (o, x) in dv.row_mut(j).iter_mut().zip(gr) {
                                *o += w * x;
                            }
                            let dl = w * (d - mean);
                            for (o, x) in dq.row_mut(r).iter_mut().zip(vk.row(j)) {
                                *o += dl * x;
                            }
                            for (o, x) in dk.row_mut(j).iter_mut().zip(vq.row(r)) {
                                *o += dl * x;
                            }
                        }
                    }
                    self.acc(&mut adj, *q, &dq);
                    self.acc(&mut adj, *k, &dk);
                    self.acc(&mut adj, *v, &dv);
                }
            }
        }
        Ok(grads)
    }

    fn acc(&self, adj: &mut [Option<Tensor2>], v: Var, g: &Tensor2) {
        if !self.ng(v) {
            return;
        }
        match &mut adj[v.0] {
            Some(t) => t.add_assign(g),
            slot @ None => *slot = Some(g.clone()),
        }
    }
}

fn slot(adj: &mut [Option<Tensor2>], v: Var, shape: (usize, usize)) -> &mut Tensor2 {
    adj[v.0].get_or_insert_with(|| Tensor2::zeros(shape.0, shape.1))
}

fn zip(g: &Tensor2, x: &Tensor2, f: impl Fn(f64, f64) -> f64) -> Tensor2 {
    let data = g.data().iter().zip(x.data()).map(|(&a, &b)| f(a, b)).collect();
    Tensor2::from_vec(g.rows(), g.cols(), data).expect("same shape")
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
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
