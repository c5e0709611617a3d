//! Define-by-run reverse-mode differentiation.
//!
//! Every primitive called on a [`Tape`] evaluates eagerly and appends one
//! node holding its output value and input ids. Inputs always precede their
//! outputs, so the node list is a topological order and [`Tape::backward`]
//! is a single reverse sweep. A tape supports exactly one backward pass.

use std::collections::BTreeMap;

use super::activation::{relu, sigmoid, softmax_rows, softplus, Activation};
use super::tensor::{matmul_nt_acc, matmul_tn_acc};
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Caller-assigned identifier of a trainable tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Softmax(Var),
    Softplus(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    Reshape(Var),
    Sum(Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<(ParamId, Var)>,
    consumed: bool,
}

/// Gradients of a scalar loss keyed by parameter id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Gradients {
    map: BTreeMap<ParamId, Tensor>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.map.get(&id)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ParamId, &Tensor)> {
        self.map.iter()
    }

    /// Gradients for ids `0..n` in order.
    pub fn into_ordered(mut self, n: usize) -> Result<Vec<Tensor>> {
        (0..n)
            .map(|i| {
                self.map
                    .remove(&ParamId(i))
                    .ok_or_else(|| Error::Contract(format!("no gradient for parameter {i}")))
            })
            .collect()
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn param(&mut self, id: ParamId, value: Tensor) -> Var {
        let v = self.push(value, Op::Param);
        self.params.push((id, v));
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y)?;
        Ok(self.push(out, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    /// `x[m×n] + bias[n]` broadcast over rows.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xs, bs) = (self.shape(x), self.shape(bias));
        if xs.len() != 2 || bs.len() != 1 || xs[1] != bs[0] {
            return Err(Error::dim("add_bias", xs, bs));
        }
        let n = xs[1];
        let mut out = self.value(x).clone();
        let b = self.value(bias).data().to_vec();
        for row in out.data_mut().chunks_mut(n) {
            for (o, bv) in row.iter_mut().zip(&b) {
                *o += bv;
            }
        }
        Ok(self.push(out, Op::AddBias(x, bias)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out = self.value(a).map(|x| x * factor);
        self.push(out, Op::Scale(a, factor))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| x + c);
        self.push(out, Op::AddScalar(a))
    }

    pub fn activate(&mut self, kind: Activation, a: Var) -> Var {
        match kind {
            Activation::Relu => self.relu(a),
            Activation::Sigmoid => self.sigmoid(a),
            Activation::Tanh => self.tanh(a),
            Activation::Softmax => self.softmax(a),
        }
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(relu);
        self.push(out, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        self.push(out, Op::Tanh(a))
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Var {
        let width = *self.shape(a).last().expect("rank >= 1");
        let mut out = self.value(a).clone();
        softmax_rows(out.data_mut(), width);
        self.push(out, Op::Softmax(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let out = self.value(a).map(softplus);
        self.push(out, Op::Softplus(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let refs: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let out = Tensor::concat_cols(&refs)?;
        Ok(self.push(out, Op::ConcatCols(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let out = self.value(a).slice_cols(start, end)?;
        Ok(self.push(out, Op::SliceCols(a, start)))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).reshape(shape)?;
        Ok(self.push(out, Op::Reshape(a)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(out, Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Reverse sweep from a scalar `loss`. Every registered parameter gets a
    /// gradient (zeros when unreachable from the loss).
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::full(self.shape(loss), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Param => {
                    grads[idx] = Some(g);
                }
                Op::MatMul(a, b) => {
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
                    let ga = acc_slot(&mut grads, *a, av.shape());
                    matmul_nt_acc(g.data(), bv.data(), ga.data_mut(), m, k, n);
                    let gb = acc_slot(&mut grads, *b, bv.shape());
                    matmul_tn_acc(av.data(), g.data(), gb.data_mut(), m, k, n);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, &g, 1.0);
                    accumulate(&mut grads, *b, &g, 1.0);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, &g, 1.0);
                    accumulate(&mut grads, *b, &g, -1.0);
                }
                Op::Mul(a, b) => {
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    let ga = g.zip_map(bv, |x, y| x * y)?;
                    let gb = g.zip_map(av, |x, y| x * y)?;
                    accumulate(&mut grads, *a, &ga, 1.0);
                    accumulate(&mut grads, *b, &gb, 1.0);
                }
                Op::AddBias(x, bias) => {
                    accumulate(&mut grads, *x, &g, 1.0);
                    let n = g.shape()[1];
                    let gb = acc_slot(&mut grads, *bias, &[n]);
                    for row in g.data().chunks(n) {
                        for (o, v) in gb.data_mut().iter_mut().zip(row) {
                            *o += v;
                        }
                    }
                }
                Op::Scale(a, f) => accumulate(&mut grads, *a, &g, *f),
                Op::AddScalar(a) => accumulate(&mut grads, *a, &g, 1.0),
                Op::Relu(a) => {
                    let x = &self.nodes[a.0].value;
                    let ga = g.zip_map(x, |gv, xv| if xv > 0.0 { gv } else { 0.0 })?;
                    accumulate(&mut grads, *a, &ga, 1.0);
                }
                Op::Sigmoid(a) => {
                    let ga = g.zip_map(&node.value, |gv, y| gv * y * (1.0 - y))?;
                    accumulate(&mut grads, *a, &ga, 1.0);
                }
                Op::Tanh(a) => {
                    let ga = g.zip_map(&node.value, |gv, y| gv * (1.0 - y * y))?;
                    accumulate(&mut grads, *a, &ga, 1.0);
                }
                Op::Softplus(a) => {
                    let x = &self.nodes[a.0].value;
                    let ga = g.zip_map(x, |gv, xv| gv * sigmoid(xv))?;
                    accumulate(&mut grads, *a, &ga, 1.0);
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let width = *y.shape().last().expect("rank >= 1");
                    let mut ga = g.clone();
                    for (grow, yrow) in ga.data_mut().chunks_mut(width).zip(y.data().chunks(width)) {
                        let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                        for (gv, yv) in grow.iter_mut().zip(yrow) {
                            *gv = yv * (*gv - dot);
                        }
                    }
                    accumulate(&mut grads, *a, &ga, 1.0);
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let w = self.nodes[p.0].value.shape()[1];
                        let gp = g.slice_cols(start, start + w)?;
                        accumulate(&mut grads, *p, &gp, 1.0);
                        start += w;
                    }
                }
                Op::SliceCols(a, start) => {
                    let src_shape = self.nodes[a.0].value.shape().to_vec();
                    let n = src_shape[1];
                    let w = g.shape()[1];
                    let ga = acc_slot(&mut grads, *a, &src_shape);
                    for (i, grow) in g.data().chunks(w).enumerate() {
                        let dst = &mut ga.data_mut()[i * n + start..i * n + start + w];
                        for (d, v) in dst.iter_mut().zip(grow) {
                            *d += v;
                        }
                    }
                }
                Op::Reshape(a) => {
                    let shape = self.nodes[a.0].value.shape().to_vec();
                    let ga = g.reshape(&shape)?;
                    accumulate(&mut grads, *a, &ga, 1.0);
                }
                Op::Sum(a) => {
                    let shape = self.nodes[a.0].value.shape().to_vec();
                    let ga = Tensor::full(&shape, g.data()[0]);
                    accumulate(&mut grads, *a, &ga, 1.0);
                }
            }
        }

        let mut map = BTreeMap::new();
        for &(id, var) in &self.params {
            let g = if var.0 <= loss.0 {
                grads[var.0].take()
            } else {
                None
            }
            .unwrap_or_else(|| Tensor::zeros(self.shape(var)));
            match map.get_mut(&id) {
                None => {
                    map.insert(id, g);
                }
                Some(existing) => {
                    let t: &mut Tensor = existing;
                    for (o, v) in t.data_mut().iter_mut().zip(g.data()) {
                        *o += v;
                    }
                }
            }
        }
        Ok(Gradients { map })
    }
}

fn acc_slot<'a>(grads: &'a mut [Option<Tensor>], v: Var, shape: &[usize]) -> &'a mut Tensor {
    grads[v.0].get_or_insert_with(|| Tensor::zeros(shape))
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: &Tensor, factor: f64) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (o, x) in existing.data_mut().iter_mut().zip(g.data()) {
                *o += factor * x;
            }
        }
        slot @ None => {
            *slot = Some(if factor == 1.0 { g.clone() } else { g.map(|x| x * factor) });
        }
    }
}
