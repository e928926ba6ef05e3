use std::str::FromStr;

use super::kernels::{self, sigmoid};
use super::{ParamId, ParamSet, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::Config(format!(
                "unknown activation {other:?} (expected relu, tanh or sigmoid)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Elementwise {
    Add,
    Sub,
    Mul,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Matmul { a: Var, b: Var, p: usize, q: usize, r: usize },
    Transpose { x: Var },
    Reshape { x: Var },
    Elementwise { kind: Elementwise, a: Var, b: Var },
    Scale { x: Var, factor: f64 },
    AddRow { x: Var, bias: Var },
    Act { kind: Activation, x: Var },
    Softmax { x: Var },
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    SliceCols { x: Var, start: usize },
    ConcatCols { parts: Vec<Var> },
    SliceRows { x: Var, start: usize },
    ConcatRows { parts: Vec<Var> },
    Sum { x: Var },
    Mean { x: Var },
    Rmse { a: Var, b: Var },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Define-by-run gradient tape. Nodes are appended in evaluation order, so
/// parents always precede children.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<(Var, ParamId)>,
}

/// Tape variables for every parameter of a [`ParamSet`].
#[derive(Clone, Debug)]
pub struct Binding {
    vars: Vec<Var>,
}

impl Binding {
    pub fn get(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }
}

/// Result of [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    visited: usize,
}

impl Gradients {
    /// Number of operation nodes whose local gradient was evaluated.
    pub fn visited(&self) -> usize {
        self.visited
    }

    pub fn wrt(&self, tape: &Tape, var: Var) -> Option<Tensor> {
        self.grads[var.0].as_ref().map(|g| Tensor {
            shape: tape.nodes[var.0].value.shape().to_vec(),
            data: g.clone(),
        })
    }

    /// Adds the gradient of every bound parameter into `params`' grad buffers.
    pub fn accumulate_into(&self, tape: &Tape, params: &mut ParamSet) {
        for &(var, id) in &tape.params {
            if let Some(g) = &self.grads[var.0] {
                let dst = params.get_mut(id).grad.data_mut();
                for (d, s) in dst.iter_mut().zip(g) {
                    *d += s;
                }
            }
        }
    }
}

fn broadcast_shape(a: &Tensor, b: &Tensor) -> Option<Vec<usize>> {
    if a.shape() == b.shape() {
        Some(a.shape().to_vec())
    } else if a.len() == 1 {
        Some(b.shape().to_vec())
    } else if b.len() == 1 {
        Some(a.shape().to_vec())
    } else {
        None
    }
}

fn lookup(data: &[f64], i: usize) -> f64 {
    if data.len() == 1 {
        data[0]
    } else {
        data[i]
    }
}

/// Reduce a full-size contribution onto a possibly scalar parent.
fn reduce_to(len: usize, full: Vec<f64>) -> Vec<f64> {
    if len == 1 && full.len() != 1 {
        vec![full.iter().sum()]
    } else {
        full
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

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A constant input; no gradient flows into it.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// A differentiable leaf not tied to a parameter set.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> Var {
        let v = self.push(params.value(id).clone(), Op::Leaf, true);
        self.params.push((v, id));
        v
    }

    pub fn bind(&mut self, params: &ParamSet) -> Binding {
        let vars = params.ids().map(|id| self.param(params, id)).collect();
        Binding { vars }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if av.shape().len() != 2 || bv.shape().len() != 2 || av.cols() != bv.rows() {
            return Err(Error::dim("matmul", av.shape(), bv.shape()));
        }
        let (p, q, r) = (av.rows(), av.cols(), bv.cols());
        let data = kernels::matmul(av.data(), bv.data(), p, q, r);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(
            Tensor { shape: vec![p, r], data },
            Op::Matmul { a, b, p, q, r },
            rg,
        ))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let xv = &self.nodes[x.0].value;
        if xv.shape().len() != 2 {
            return Err(Error::dim("transpose", xv.shape(), &[]));
        }
        let value = xv.transpose();
        let rg = self.rg(x);
        Ok(self.push(value, Op::Transpose { x }, rg))
    }

    /// Same data, new shape.
    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let value = self.nodes[x.0].value.clone().reshape(shape)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::Reshape { x }, rg))
    }

    pub fn elementwise(&mut self, kind: Elementwise, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let shape = broadcast_shape(av, bv)
            .ok_or_else(|| Error::dim("elementwise", av.shape(), bv.shape()))?;
        let n: usize = shape.iter().product();
        let (ad, bd) = (av.data(), bv.data());
        let data = (0..n)
            .map(|i| {
                let (x, y) = (lookup(ad, i), lookup(bd, i));
                match kind {
                    Elementwise::Add => x + y,
                    Elementwise::Sub => x - y,
                    Elementwise::Mul => x * y,
                }
            })
            .collect();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor { shape, data }, Op::Elementwise { kind, a, b }, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(Elementwise::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(Elementwise::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(Elementwise::Mul, a, b)
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let value = self.nodes[x.0].value.map(|v| v * factor);
        let rg = self.rg(x);
        self.push(value, Op::Scale { x, factor }, rg)
    }

    /// `x[p×d] + bias[d]`, the bias repeated on every row.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (&self.nodes[x.0].value, &self.nodes[bias.0].value);
        if xv.shape().len() != 2 || bv.len() != xv.cols() {
            return Err(Error::dim("add_row", xv.shape(), bv.shape()));
        }
        let c = xv.cols();
        let bd = bv.data();
        let data = xv
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| v + bd[i % c])
            .collect();
        let value = Tensor {
            shape: xv.shape().to_vec(),
            data,
        };
        let rg = self.rg(x) || self.rg(bias);
        Ok(self.push(value, Op::AddRow { x, bias }, rg))
    }

    /// `x · w + b` for `x[p×i]`, `w[i×o]`, `b[o]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xw = self.matmul(x, w)?;
        self.add_row(xw, b)
    }

    pub fn activation(&mut self, kind: Activation, x: Var) -> Var {
        let value = self.nodes[x.0].value.map(|v| kind.apply(v));
        let rg = self.rg(x);
        self.push(value, Op::Act { kind, x }, rg)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.activation(Activation::Relu, x)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.activation(Activation::Tanh, x)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.activation(Activation::Sigmoid, x)
    }

    /// Row-wise softmax, stabilised by subtracting each row's maximum.
    pub fn softmax_rows(&mut self, x: Var) -> Result<Var> {
        let xv = &self.nodes[x.0].value;
        if xv.shape().len() != 2 {
            return Err(Error::dim("softmax_rows", xv.shape(), &[]));
        }
        let c = xv.cols();
        let mut data = xv.data().to_vec();
        for row in data.chunks_mut(c) {
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
        let value = Tensor {
            shape: xv.shape().to_vec(),
            data,
        };
        let rg = self.rg(x);
        Ok(self.push(value, Op::Softmax { x }, rg))
    }

    /// Per-row normalisation to zero mean and unit (population) variance,
    /// followed by `gain ⊙ · + bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        if eps <= 0.0 {
            return Err(Error::Contract(format!("layer_norm eps must be > 0, got {eps}")));
        }
        let xv = &self.nodes[x.0].value;
        let (gv, bv) = (&self.nodes[gain.0].value, &self.nodes[bias.0].value);
        if xv.shape().len() != 2 || gv.len() != xv.cols() || bv.len() != xv.cols() {
            return Err(Error::dim("layer_norm", xv.shape(), gv.shape()));
        }
        let (r, c) = (xv.rows(), xv.cols());
        let mut xhat = vec![0.0; r * c];
        let mut inv_std = vec![0.0; r];
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            let row = xv.row(i);
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std[i] = is;
            for j in 0..c {
                let h = (row[j] - mean) * is;
                xhat[i * c + j] = h;
                data[i * c + j] = gv.data()[j] * h + bv.data()[j];
            }
        }
        let rg = self.rg(x) || self.rg(gain) || self.rg(bias);
        Ok(self.push(
            Tensor {
                shape: vec![r, c],
                data,
            },
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            rg,
        ))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = &self.nodes[x.0].value;
        if xv.shape().len() != 2 || start + len > xv.cols() || len == 0 {
            return Err(Error::dim("slice_cols", xv.shape(), &[start, len]));
        }
        let (r, c) = (xv.rows(), xv.cols());
        let mut data = Vec::with_capacity(r * len);
        for i in 0..r {
            data.extend_from_slice(&xv.data()[i * c + start..i * c + start + len]);
        }
        let rg = self.rg(x);
        Ok(self.push(
            Tensor {
                shape: vec![r, len],
                data,
            },
            Op::SliceCols { x, start },
            rg,
        ))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Contract("concat_cols of nothing".into()))?;
        let r = self.nodes[first.0].value.rows();
        let mut total = 0;
        for p in parts {
            let pv = &self.nodes[p.0].value;
            if pv.shape().len() != 2 || pv.rows() != r {
                return Err(Error::dim(
                    "concat_cols",
                    self.nodes[first.0].value.shape(),
                    pv.shape(),
                ));
            }
            total += pv.cols();
        }
        let mut data = Vec::with_capacity(r * total);
        for i in 0..r {
            for p in parts {
                data.extend_from_slice(self.nodes[p.0].value.row(i));
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(
            Tensor {
                shape: vec![r, total],
                data,
            },
            Op::ConcatCols {
                parts: parts.to_vec(),
            },
            rg,
        ))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = &self.nodes[x.0].value;
        if xv.shape().len() != 2 || start + len > xv.rows() || len == 0 {
            return Err(Error::dim("slice_rows", xv.shape(), &[start, len]));
        }
        let c = xv.cols();
        let data = xv.data()[start * c..(start + len) * c].to_vec();
        let rg = self.rg(x);
        Ok(self.push(
            Tensor {
                shape: vec![len, c],
                data,
            },
            Op::SliceRows { x, start },
            rg,
        ))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Contract("concat_rows of nothing".into()))?;
        let c = self.nodes[first.0].value.cols();
        let mut rows = 0;
        let mut data = Vec::new();
        for p in parts {
            let pv = &self.nodes[p.0].value;
            if pv.cols() != c || pv.shape().len() > 2 {
                return Err(Error::dim(
                    "concat_rows",
                    self.nodes[first.0].value.shape(),
                    pv.shape(),
                ));
            }
            rows += pv.rows();
            data.extend_from_slice(pv.data());
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(
            Tensor {
                shape: vec![rows, c],
                data,
            },
            Op::ConcatRows {
                parts: parts.to_vec(),
            },
            rg,
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.nodes[x.0].value.data().iter().sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Sum { x }, rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let xv = &self.nodes[x.0].value;
        let s = xv.data().iter().sum::<f64>() / xv.len() as f64;
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Mean { x }, rg)
    }

    /// `sqrt(mean((a - b)^2))`; its derivative at zero error is taken as 0.
    pub fn rmse(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if av.len() != bv.len() {
            return Err(Error::dim("rmse", av.shape(), bv.shape()));
        }
        let n = av.len() as f64;
        let mse = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            / n;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::scalar(mse.sqrt()), Op::Rmse { a, b }, rg))
    }

    /// Reverse sweep from a single-element `root`.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let rv = &self.nodes[root.0].value;
        if !rv.is_scalar() {
            return Err(Error::Contract(format!(
                "backward root must be a single element, got shape {:?}",
                rv.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(vec![1.0]);
        let mut visited = 0;

        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            visited += 1;
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads, visited })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, contribution: Vec<f64>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => {
                for (e, c) in existing.iter_mut().zip(&contribution) {
                    *e += c;
                }
            }
            slot @ None => *slot = Some(contribution),
        }
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::Matmul { a, b, p, q, r } => {
                if self.rg(*a) {
                    let da = kernels::matmul_nt(g, val(*b).data(), *p, *q, *r);
                    self.accumulate(grads, *a, da);
                }
                if self.rg(*b) {
                    let db = kernels::matmul_tn(val(*a).data(), g, *p, *q, *r);
                    self.accumulate(grads, *b, db);
                }
            }
            Op::Transpose { x } => {
                let (r, c) = (node.value.rows(), node.value.cols());
                self.accumulate(grads, *x, kernels::transpose(g, r, c));
            }
            Op::Reshape { x } => self.accumulate(grads, *x, g.to_vec()),
            Op::Elementwise { kind, a, b } => {
                let (ad, bd) = (val(*a).data(), val(*b).data());
                let n = g.len();
                if self.rg(*a) {
                    let full: Vec<f64> = match kind {
                        Elementwise::Add | Elementwise::Sub => g.to_vec(),
                        Elementwise::Mul => (0..n).map(|i| g[i] * lookup(bd, i)).collect(),
                    };
                    self.accumulate(grads, *a, reduce_to(ad.len(), full));
                }
                if self.rg(*b) {
                    let full: Vec<f64> = match kind {
                        Elementwise::Add => g.to_vec(),
                        Elementwise::Sub => g.iter().map(|v| -v).collect(),
                        Elementwise::Mul => (0..n).map(|i| g[i] * lookup(ad, i)).collect(),
                    };
                    self.accumulate(grads, *b, reduce_to(bd.len(), full));
                }
            }
            Op::Scale { x, factor } => {
                self.accumulate(grads, *x, g.iter().map(|v| v * factor).collect());
            }
            Op::AddRow { x, bias } => {
                if self.rg(*x) {
                    self.accumulate(grads, *x, g.to_vec());
                }
                if self.rg(*bias) {
                    let c = node.value.cols();
                    let mut db = vec![0.0; c];
                    for row in g.chunks(c) {
                        for (d, v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    self.accumulate(grads, *bias, db);
                }
            }
            Op::Act { kind, x } => {
                let (xd, yd) = (val(*x).data(), node.value.data());
                let dx = match kind {
                    Activation::Relu => g
                        .iter()
                        .zip(xd)
                        .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                        .collect(),
                    Activation::Tanh => g.iter().zip(yd).map(|(g, y)| g * (1.0 - y * y)).collect(),
                    Activation::Sigmoid => {
                        g.iter().zip(yd).map(|(g, y)| g * y * (1.0 - y)).collect()
                    }
                };
                self.accumulate(grads, *x, dx);
            }
            Op::Softmax { x } => {
                let c = node.value.cols();
                let mut dx = vec![0.0; g.len()];
                for ((y, gr), d) in node
                    .value
                    .data()
                    .chunks(c)
                    .zip(g.chunks(c))
                    .zip(dx.chunks_mut(c))
                {
                    let dot: f64 = y.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for j in 0..c {
                        d[j] = y[j] * (gr[j] - dot);
                    }
                }
                self.accumulate(grads, *x, dx);
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let c = node.value.cols();
                let gd = val(*gain).data();
                if self.rg(*gain) || self.rg(*bias) {
                    let mut dgain = vec![0.0; c];
                    let mut dbias = vec![0.0; c];
                    for (gr, h) in g.chunks(c).zip(xhat.chunks(c)) {
                        for j in 0..c {
                            dgain[j] += gr[j] * h[j];
                            dbias[j] += gr[j];
                        }
                    }
                    self.accumulate(grads, *gain, dgain);
                    self.accumulate(grads, *bias, dbias);
                }
                if self.rg(*x) {
                    let mut dx = vec![0.0; g.len()];
                    let cf = c as f64;
                    for (i, ((gr, h), d)) in g
                        .chunks(c)
                        .zip(xhat.chunks(c))
                        .zip(dx.chunks_mut(c))
                        .enumerate()
                    {
                        let dh: Vec<f64> = (0..c).map(|j| gr[j] * gd[j]).collect();
                        let mean_dh = dh.iter().sum::<f64>() / cf;
                        let mean_dh_h = dh.iter().zip(h).map(|(a, b)| a * b).sum::<f64>() / cf;
                        for j in 0..c {
                            d[j] = inv_std[i] * (dh[j] - mean_dh - h[j] * mean_dh_h);
                        }
                    }
                    self.accumulate(grads, *x, dx);
                }
            }
            Op::SliceCols { x, start } => {
                let xv = val(*x);
                let (r, c) = (xv.rows(), xv.cols());
                let len = node.value.cols();
                let mut dx = vec![0.0; r * c];
                for i in 0..r {
                    dx[i * c + start..i * c + start + len]
                        .copy_from_slice(&g[i * len..(i + 1) * len]);
                }
                self.accumulate(grads, *x, dx);
            }
            Op::ConcatCols { parts } => {
                let total = node.value.cols();
                let r = node.value.rows();
                let mut offset = 0;
                for p in parts {
                    let w = val(*p).cols();
                    if self.rg(*p) {
                        let mut dp = Vec::with_capacity(r * w);
                        for i in 0..r {
                            dp.extend_from_slice(&g[i * total + offset..i * total + offset + w]);
                        }
                        self.accumulate(grads, *p, dp);
                    }
                    offset += w;
                }
            }
            Op::SliceRows { x, start } => {
                let xv = val(*x);
                let c = xv.cols();
                let mut dx = vec![0.0; xv.len()];
                dx[start * c..start * c + g.len()].copy_from_slice(g);
                self.accumulate(grads, *x, dx);
            }
            Op::ConcatRows { parts } => {
                let mut offset = 0;
                for p in parts {
                    let n = val(*p).len();
                    if self.rg(*p) {
                        self.accumulate(grads, *p, g[offset..offset + n].to_vec());
                    }
                    offset += n;
                }
            }
            Op::Sum { x } => {
                self.accumulate(grads, *x, vec![g[0]; val(*x).len()]);
            }
            Op::Mean { x } => {
                let n = val(*x).len();
                self.accumulate(grads, *x, vec![g[0] / n as f64; n]);
            }
            Op::Rmse { a, b } => {
                let r = node.value.item();
                let (ad, bd) = (val(*a).data(), val(*b).data());
                let n = ad.len() as f64;
                let da: Vec<f64> = if r == 0.0 {
                    vec![0.0; ad.len()]
                } else {
                    ad.iter()
                        .zip(bd)
                        .map(|(x, y)| g[0] * (x - y) / (n * r))
                        .collect()
                };
                if self.rg(*b) {
                    self.accumulate(grads, *b, da.iter().map(|v| -v).collect());
                }
                self.accumulate(grads, *a, da);
            }
        }
    }
}
