//! Reverse-mode differentiation on a per-forward-pass tape.
//!
//! A [`Tape`] records every operation applied to [`Var`]s in creation order,
//! which is already a topological order, so [`Tape::backward`] is a single
//! reverse sweep. Tapes are not `Sync`; use one tape per worker.

use std::cell::{Ref, RefCell};

use crate::error::{Error, Result};
use crate::tensor::{gemm, Tensor};

/// How the attention-weighted rows are handed to the consumer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Embedding {
    /// The full `r × D` matrix per sample, flattened hop-major.
    Full,
    /// The mean over hops, a length-`D` vector per sample.
    Averaged,
}

enum Op {
    Leaf,
    MatMul(usize, usize),
    Transpose(usize),
    Reshape(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Neg(usize),
    Abs(usize),
    Sigmoid(usize),
    Tanh(usize),
    Scale(usize, f64),
    AddRowBias(usize, usize),
    SoftmaxRows(usize),
    Sum(usize),
    SliceRows { src: usize, start: usize },
    ConcatRows(Vec<usize>),
    AddMany(Vec<usize>),
    MaxMany { srcs: Vec<usize>, winner: Vec<u32> },
    PrefixAttention(Box<PrefixAttention>),
    CrossEntropy { logits: usize, targets: Vec<usize>, probs: Vec<f64> },
}

struct PrefixAttention {
    logits: usize,
    values: usize,
    batch: usize,
    prefix: usize,
    hops: usize,
    mode: Embedding,
    /// Softmax weights laid out `[batch][hop][step]`.
    weights: Vec<f64>,
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// A handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.shape())
    }
}

enum Contribution {
    Whole(Tensor),
    Rows { start: usize, grad: Tensor },
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A differentiable input.
    pub fn leaf(&self, value: Tensor) -> Result<Var<'_>> {
        self.push(value, Op::Leaf, true, "leaf")
    }

    /// An input that never receives a gradient.
    pub fn constant(&self, value: Tensor) -> Result<Var<'_>> {
        self.push(value, Op::Leaf, false, "constant")
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool, name: &'static str) -> Result<Var<'_>> {
        value.dims()?;
        if !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var {
            tape: self,
            id: nodes.len() - 1,
        })
    }

    fn requires(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].requires_grad)
    }

    fn check_same(&self, vars: &[Var<'_>]) -> Result<()> {
        for v in vars {
            if !std::ptr::eq(v.tape, self) {
                return Err(Error::Contract("variables from different tapes".into()));
            }
        }
        Ok(())
    }

    pub fn concat_rows<'t>(&'t self, parts: &[Var<'t>]) -> Result<Var<'t>> {
        self.check_same(parts)?;
        let first = parts
            .first()
            .ok_or_else(|| Error::Contract("concat_rows of nothing".into()))?;
        let cols = first.value().cols();
        let mut rows = 0;
        let mut data = Vec::new();
        for p in parts {
            let v = p.value();
            if v.cols() != cols {
                return Err(Error::shape("concat_rows", first.value().shape(), v.shape()));
            }
            rows += v.rows();
            data.extend_from_slice(v.data());
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
        let rg = self.requires(&ids);
        self.push(Tensor::matrix(rows, cols, data)?, Op::ConcatRows(ids), rg, "concat_rows")
    }

    /// Elementwise sum of equally shaped values.
    pub fn add_many<'t>(&'t self, parts: &[Var<'t>]) -> Result<Var<'t>> {
        self.check_same(parts)?;
        let first = parts
            .first()
            .ok_or_else(|| Error::Contract("add_many of nothing".into()))?;
        let mut acc = first.value().clone();
        for p in &parts[1..] {
            let v = p.value();
            if v.shape() != acc.shape() {
                return Err(Error::shape("add_many", acc.shape(), v.shape()));
            }
            acc.add_assign(&v);
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
        let rg = self.requires(&ids);
        self.push(acc, Op::AddMany(ids), rg, "add_many")
    }

    /// Elementwise maximum of equally shaped values. Ties go to the earliest.
    pub fn max_many<'t>(&'t self, parts: &[Var<'t>]) -> Result<Var<'t>> {
        self.check_same(parts)?;
        let first = parts
            .first()
            .ok_or_else(|| Error::Contract("max_many of nothing".into()))?;
        let mut acc = first.value().clone();
        let mut winner = vec![0u32; acc.len()];
        for (k, p) in parts.iter().enumerate().skip(1) {
            let v = p.value();
            if v.shape() != acc.shape() {
                return Err(Error::shape("max_many", acc.shape(), v.shape()));
            }
            for (i, (a, &b)) in acc.data_mut().iter_mut().zip(v.data()).enumerate() {
                if b > *a {
                    *a = b;
                    winner[i] = k as u32;
                }
            }
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
        let rg = self.requires(&ids);
        self.push(acc, Op::MaxMany { srcs: ids, winner }, rg, "max_many")
    }

    /// Attention over the first `prefix` timesteps of a time-major batch.
    ///
    /// `logits` is `(steps·batch) × hops` and `values` is `(steps·batch) × D`,
    /// both with row `s·batch + b` holding timestep `s` of sample `b`. For each
    /// sample and hop, the logits of timesteps `0..prefix` are normalised with
    /// a softmax and used to weight the matching value rows. The result is
    /// `batch × (hops·D)` in [`Embedding::Full`] mode and `batch × D` in
    /// [`Embedding::Averaged`] mode.
    pub fn prefix_attention<'t>(
        &'t self,
        logits: Var<'t>,
        values: Var<'t>,
        batch: usize,
        prefix: usize,
        mode: Embedding,
    ) -> Result<Var<'t>> {
        self.check_same(&[logits, values])?;
        let (out, weights, hops) = {
            let l = logits.value();
            let v = values.value();
            let (lr, hops) = l.dims()?;
            let (vr, d) = v.dims()?;
            if lr != vr || batch == 0 || lr % batch != 0 {
                return Err(Error::shape("prefix_attention", l.shape(), v.shape()));
            }
            if prefix == 0 || prefix > lr / batch {
                return Err(Error::Contract(format!(
                    "attention prefix {prefix} outside 1..={}",
                    lr / batch
                )));
            }
            let (out, weights) = attention_forward(l.data(), v.data(), batch, prefix, hops, d, mode);
            (out, weights, hops)
        };
        let rg = self.requires(&[logits.id, values.id]);
        let op = Op::PrefixAttention(Box::new(PrefixAttention {
            logits: logits.id,
            values: values.id,
            batch,
            prefix,
            hops,
            mode,
            weights,
        }));
        self.push(out, op, rg, "prefix_attention")
    }

    /// Mean softmax cross-entropy of `batch × classes` logits.
    pub fn cross_entropy<'t>(&'t self, logits: Var<'t>, targets: &[usize]) -> Result<Var<'t>> {
        self.check_same(&[logits])?;
        let (loss, probs) = {
            let l = logits.value();
            let (b, c) = l.dims()?;
            if targets.len() != b {
                return Err(Error::shape("cross_entropy", l.shape(), &[targets.len()]));
            }
            if let Some(&bad) = targets.iter().find(|&&t| t >= c) {
                return Err(Error::Contract(format!("target class {bad} out of range 0..{c}")));
            }
            let mut probs = vec![0.0; b * c];
            let mut loss = 0.0;
            for (i, &t) in targets.iter().enumerate() {
                let row = &l.data()[i * c..(i + 1) * c];
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for (p, &x) in probs[i * c..(i + 1) * c].iter_mut().zip(row) {
                    *p = (x - max).exp();
                    z += *p;
                }
                for p in &mut probs[i * c..(i + 1) * c] {
                    *p /= z;
                }
                loss += z.ln() + max - row[t];
            }
            (loss / b as f64, probs)
        };
        let rg = self.requires(&[logits.id]);
        self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits: logits.id,
                targets: targets.to_vec(),
                probs,
            },
            rg,
            "cross_entropy",
        )
    }

    /// Reverse sweep from a scalar root. Gradients of values used more than
    /// once are summed over every use.
    pub fn backward(&self, root: Var<'_>) -> Result<Gradients> {
        self.check_same(&[root])?;
        let nodes = self.nodes.borrow();
        if nodes[root.id].value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar root, got shape {:?}",
                nodes[root.id].value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(root.id + 1);
        grads.resize_with(root.id + 1, || None);
        grads[root.id] = Some(Tensor::full(1, 1, 1.0));
        for id in (0..=root.id).rev() {
            let node = &nodes[id];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            for (parent, contribution) in local_backward(&nodes, node, &g) {
                accumulate(&mut grads[parent], &nodes[parent].value, contribution);
            }
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(slot: &mut Option<Tensor>, like: &Tensor, contribution: Contribution) {
    match contribution {
        Contribution::Whole(t) => match slot {
            Some(acc) => acc.add_assign(&t),
            None => *slot = Some(t),
        },
        Contribution::Rows { start, grad } => {
            let acc = slot.get_or_insert_with(|| Tensor::zeros(like.rows(), like.cols()));
            let cols = acc.cols();
            let dst = &mut acc.data_mut()[start * cols..start * cols + grad.len()];
            for (a, b) in dst.iter_mut().zip(grad.data()) {
                *a += b;
            }
        }
    }
}

fn local_backward(nodes: &[Node], node: &Node, g: &Tensor) -> Vec<(usize, Contribution)> {
    let val = |i: usize| &nodes[i].value;
    let wants = |i: usize| nodes[i].requires_grad;
    let mut out = Vec::new();
    let mut push = |i: usize, t: Tensor| {
        if wants(i) {
            out.push((i, Contribution::Whole(t)));
        }
    };
    match &node.op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let (m, k) = (val(*a).rows(), val(*a).cols());
            let n = val(*b).cols();
            if wants(*a) {
                let mut da = vec![0.0; m * k];
                gemm((m, n, k), g.data(), false, val(*b).data(), true, &mut da, false);
                push(*a, Tensor::matrix(m, k, da).expect("matmul grad shape"));
            }
            if wants(*b) {
                let mut db = vec![0.0; k * n];
                gemm((k, m, n), val(*a).data(), true, g.data(), false, &mut db, false);
                push(*b, Tensor::matrix(k, n, db).expect("matmul grad shape"));
            }
        }
        Op::Transpose(a) => push(*a, g.transpose().expect("rank 2")),
        Op::Reshape(a) => push(*a, Tensor::new(val(*a).shape().to_vec(), g.data().to_vec()).expect("reshape grad")),
        Op::Add(a, b) => {
            push(*a, g.clone());
            push(*b, g.clone());
        }
        Op::Sub(a, b) => {
            push(*a, g.clone());
            push(*b, g.map(|x| -x));
        }
        Op::Mul(a, b) => {
            if wants(*a) {
                push(*a, g.zip_map(val(*b), |x, y| x * y));
            }
            if wants(*b) {
                push(*b, g.zip_map(val(*a), |x, y| x * y));
            }
        }
        Op::Neg(a) => push(*a, g.map(|x| -x)),
        Op::Abs(a) => push(*a, g.zip_map(val(*a), |x, v| if v > 0.0 { x } else if v < 0.0 { -x } else { 0.0 })),
        Op::Sigmoid(a) => push(*a, g.zip_map(&node.value, |x, y| x * y * (1.0 - y))),
        Op::Tanh(a) => push(*a, g.zip_map(&node.value, |x, y| x * (1.0 - y * y))),
        Op::Scale(a, k) => push(*a, g.map(|x| x * k)),
        Op::AddRowBias(a, bias) => {
            push(*a, g.clone());
            if wants(*bias) {
                let cols = g.cols();
                let mut db = vec![0.0; cols];
                for row in g.data().chunks(cols) {
                    for (d, x) in db.iter_mut().zip(row) {
                        *d += x;
                    }
                }
                push(*bias, Tensor::row(db).expect("bias grad"));
            }
        }
        Op::SoftmaxRows(a) => {
            let y = &node.value;
            let cols = y.cols();
            let mut d = vec![0.0; y.len()];
            for ((dr, yr), gr) in d.chunks_mut(cols).zip(y.data().chunks(cols)).zip(g.data().chunks(cols)) {
                let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                for ((o, &p), &q) in dr.iter_mut().zip(yr).zip(gr) {
                    *o = p * (q - dot);
                }
            }
            push(*a, Tensor::new(y.shape().to_vec(), d).expect("softmax grad"));
        }
        Op::Sum(a) => {
            let s = val(*a);
            push(*a, Tensor::full(s.rows(), s.cols(), g.data()[0]));
        }
        Op::SliceRows { src, start } => {
            if wants(*src) {
                out.push((*src, Contribution::Rows { start: *start, grad: g.clone() }));
            }
        }
        Op::ConcatRows(srcs) => {
            let cols = g.cols();
            let mut offset = 0;
            for &s in srcs {
                let rows = val(s).rows();
                if wants(s) {
                    let part = g.data()[offset * cols..(offset + rows) * cols].to_vec();
                    out.push((s, Contribution::Whole(Tensor::matrix(rows, cols, part).expect("concat grad"))));
                }
                offset += rows;
            }
        }
        Op::AddMany(srcs) => {
            for &s in srcs {
                if wants(s) {
                    out.push((s, Contribution::Whole(g.clone())));
                }
            }
        }
        Op::MaxMany { srcs, winner } => {
            for (k, &s) in srcs.iter().enumerate() {
                if !wants(s) {
                    continue;
                }
                let mut d = vec![0.0; g.len()];
                for ((o, &w), &x) in d.iter_mut().zip(winner).zip(g.data()) {
                    if w as usize == k {
                        *o = x;
                    }
                }
                out.push((s, Contribution::Whole(Tensor::new(g.shape().to_vec(), d).expect("max grad"))));
            }
        }
        Op::PrefixAttention(p) => {
            let (dl, dv) = attention_backward(p, val(p.logits), val(p.values), g);
            if wants(p.logits) {
                out.push((p.logits, Contribution::Rows { start: 0, grad: dl }));
            }
            if wants(p.values) {
                out.push((p.values, Contribution::Rows { start: 0, grad: dv }));
            }
        }
        Op::CrossEntropy { logits, targets, probs } => {
            let c = val(*logits).cols();
            let b = targets.len();
            let scale = g.data()[0] / b as f64;
            let mut d = probs.clone();
            for (i, &t) in targets.iter().enumerate() {
                d[i * c + t] -= 1.0;
            }
            for x in &mut d {
                *x *= scale;
            }
            push(*logits, Tensor::matrix(b, c, d).expect("ce grad"));
        }
    }
    out
}

fn attention_forward(
    logits: &[f64],
    values: &[f64],
    batch: usize,
    prefix: usize,
    hops: usize,
    d: usize,
    mode: Embedding,
) -> (Tensor, Vec<f64>) {
    let mut weights = vec![0.0; batch * hops * prefix];
    let width = match mode {
        Embedding::Full => hops * d,
        Embedding::Averaged => d,
    };
    let mut out = vec![0.0; batch * width];
    let mut mean_w = vec![0.0; prefix];
    for b in 0..batch {
        for k in 0..hops {
            let w = &mut weights[(b * hops + k) * prefix..(b * hops + k + 1) * prefix];
            let mut max = f64::NEG_INFINITY;
            for s in 0..prefix {
                max = max.max(logits[(s * batch + b) * hops + k]);
            }
            let mut z = 0.0;
            for (s, ws) in w.iter_mut().enumerate() {
                *ws = (logits[(s * batch + b) * hops + k] - max).exp();
                z += *ws;
            }
            for ws in w.iter_mut() {
                *ws /= z;
            }
        }
        let row_out = &mut out[b * width..(b + 1) * width];
        match mode {
            Embedding::Full => {
                for k in 0..hops {
                    let w = &weights[(b * hops + k) * prefix..(b * hops + k + 1) * prefix];
                    let dst = &mut row_out[k * d..(k + 1) * d];
                    for (s, &a) in w.iter().enumerate() {
                        let v = &values[(s * batch + b) * d..(s * batch + b + 1) * d];
                        for (o, &x) in dst.iter_mut().zip(v) {
                            *o += a * x;
                        }
                    }
                }
            }
            Embedding::Averaged => {
                // Mean over hops of A·X equals (mean over hops of A)·X.
                mean_w.iter_mut().for_each(|x| *x = 0.0);
                for k in 0..hops {
                    let w = &weights[(b * hops + k) * prefix..(b * hops + k + 1) * prefix];
                    for (m, &a) in mean_w.iter_mut().zip(w) {
                        *m += a;
                    }
                }
                for (s, &a) in mean_w.iter().enumerate() {
                    let a = a / hops as f64;
                    let v = &values[(s * batch + b) * d..(s * batch + b + 1) * d];
                    for (o, &x) in row_out.iter_mut().zip(v) {
                        *o += a * x;
                    }
                }
            }
        }
    }
    let out = Tensor::matrix(batch, width, out).expect("attention output shape");
    (out, weights)
}

/// Gradients for the logits and values, covering only the rows of the first
/// `prefix` timesteps (both are `prefix·batch` rows, starting at row 0).
fn attention_backward(p: &PrefixAttention, logits: &Tensor, values: &Tensor, g: &Tensor) -> (Tensor, Tensor) {
    let (batch, prefix, hops) = (p.batch, p.prefix, p.hops);
    let d = values.cols();
    let v = values.data();
    let mut dl = vec![0.0; prefix * batch * hops];
    let mut dv = vec![0.0; prefix * batch * d];
    let mut da = vec![0.0; prefix];
    let width = g.cols();
    debug_assert_eq!(logits.cols(), hops);
    for b in 0..batch {
        let gb = &g.data()[b * width..(b + 1) * width];
        if p.mode == Embedding::Averaged {
            // Every hop sees the same upstream gradient scaled by 1/hops.
            let scale = 1.0 / hops as f64;
            for (s, das) in da.iter_mut().enumerate() {
                let row = (s * batch + b) * d;
                *das = v[row..row + d].iter().zip(gb).map(|(x, y)| x * y).sum::<f64>() * scale;
                let mut a = 0.0;
                for k in 0..hops {
                    a += p.weights[(b * hops + k) * prefix + s];
                }
                let a = a * scale;
                for (o, y) in dv[row..row + d].iter_mut().zip(gb) {
                    *o += a * y;
                }
            }
        }
        for k in 0..hops {
            let w = &p.weights[(b * hops + k) * prefix..(b * hops + k + 1) * prefix];
            if p.mode == Embedding::Full {
                let gk = &gb[k * d..(k + 1) * d];
                for (s, das) in da.iter_mut().enumerate() {
                    let row = (s * batch + b) * d;
                    *das = v[row..row + d].iter().zip(gk).map(|(x, y)| x * y).sum();
                    for (o, y) in dv[row..row + d].iter_mut().zip(gk) {
                        *o += w[s] * y;
                    }
                }
            }
            let dot: f64 = w.iter().zip(&da).map(|(x, y)| x * y).sum();
            for s in 0..prefix {
                dl[(s * batch + b) * hops + k] = w[s] * (da[s] - dot);
            }
        }
    }
    (
        Tensor::matrix(prefix * batch, hops, dl).expect("logit grad shape"),
        Tensor::matrix(prefix * batch, d, dv).expect("value grad shape"),
    )
}

/// Gradients from one backward sweep, indexed by the [`Var`]s of its tape.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// `None` when the variable does not influence the root or was created
    /// after it.
    pub fn get(&self, var: Var<'_>) -> Option<&Tensor> {
        self.grads.get(var.id).and_then(|g| g.as_ref())
    }

    /// The gradient, or zeros shaped like `var` when it is unreachable.
    pub fn wrt(&self, var: Var<'_>) -> Tensor {
        self.get(var).cloned().unwrap_or_else(|| {
            let v = var.value();
            Tensor::zeros(v.rows(), v.cols())
        })
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> Ref<'t, Tensor> {
        Ref::map(self.tape.nodes.borrow(), |n| &n[self.id].value)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    fn unary(self, op: impl FnOnce(usize) -> Op, f: impl Fn(f64) -> f64, name: &'static str) -> Result<Var<'t>> {
        let out = self.value().map(f);
        let rg = self.tape.requires(&[self.id]);
        self.tape.push(out, op(self.id), rg, name)
    }

    fn binary(
        self,
        other: Var<'t>,
        op: impl FnOnce(usize, usize) -> Op,
        f: impl Fn(f64, f64) -> f64,
        name: &'static str,
    ) -> Result<Var<'t>> {
        self.tape.check_same(&[other])?;
        let out = {
            let a = self.value();
            let b = other.value();
            if a.shape() != b.shape() {
                return Err(Error::shape(name, a.shape(), b.shape()));
            }
            a.zip_map(&b, f)
        };
        let rg = self.tape.requires(&[self.id, other.id]);
        self.tape.push(out, op(self.id, other.id), rg, name)
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.tape.check_same(&[other])?;
        let out = self.value().matmul(&other.value())?;
        let rg = self.tape.requires(&[self.id, other.id]);
        self.tape.push(out, Op::MatMul(self.id, other.id), rg, "matmul")
    }

    pub fn transpose(self) -> Result<Var<'t>> {
        let out = self.value().transpose()?;
        let rg = self.tape.requires(&[self.id]);
        self.tape.push(out, Op::Transpose(self.id), rg, "transpose")
    }

    /// Reinterprets the row-major data under a new rank-2 shape.
    pub fn reshape(self, rows: usize, cols: usize) -> Result<Var<'t>> {
        let out = {
            let v = self.value();
            if rows * cols != v.len() {
                return Err(Error::shape("reshape", v.shape(), &[rows, cols]));
            }
            Tensor::matrix(rows, cols, v.data().to_vec())?
        };
        let rg = self.tape.requires(&[self.id]);
        self.tape.push(out, Op::Reshape(self.id), rg, "reshape")
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Op::Add, |a, b| a + b, "add")
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Op::Sub, |a, b| a - b, "sub")
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Op::Mul, |a, b| a * b, "mul")
    }

    pub fn neg(self) -> Result<Var<'t>> {
        self.unary(Op::Neg, |x| -x, "neg")
    }

    pub fn abs(self) -> Result<Var<'t>> {
        self.unary(Op::Abs, f64::abs, "abs")
    }

    pub fn sigmoid(self) -> Result<Var<'t>> {
        self.unary(Op::Sigmoid, sigmoid, "sigmoid")
    }

    pub fn tanh(self) -> Result<Var<'t>> {
        self.unary(Op::Tanh, f64::tanh, "tanh")
    }

    pub fn scale(self, k: f64) -> Result<Var<'t>> {
        self.unary(|a| Op::Scale(a, k), |x| x * k, "scale")
    }

    /// Adds a `1 × n` bias to every row of an `m × n` value.
    pub fn add_row_bias(self, bias: Var<'t>) -> Result<Var<'t>> {
        self.tape.check_same(&[bias])?;
        let out = {
            let a = self.value();
            let b = bias.value();
            let (_, n) = a.dims()?;
            if b.shape() != [1, n] {
                return Err(Error::shape("add_row_bias", a.shape(), b.shape()));
            }
            let mut out = a.clone();
            for row in out.data_mut().chunks_mut(n) {
                for (x, y) in row.iter_mut().zip(b.data()) {
                    *x += y;
                }
            }
            out
        };
        let rg = self.tape.requires(&[self.id, bias.id]);
        self.tape.push(out, Op::AddRowBias(self.id, bias.id), rg, "add_row_bias")
    }

    /// Row-wise softmax with the row maximum subtracted before exponentiation.
    pub fn softmax_rows(self) -> Result<Var<'t>> {
        let out = softmax_rows(&self.value())?;
        let rg = self.tape.requires(&[self.id]);
        self.tape.push(out, Op::SoftmaxRows(self.id), rg, "softmax_rows")
    }

    /// Sum of all entries as a `1 × 1` value.
    pub fn sum(self) -> Result<Var<'t>> {
        let out = Tensor::scalar(self.value().sum());
        let rg = self.tape.requires(&[self.id]);
        self.tape.push(out, Op::Sum(self.id), rg, "sum")
    }

    pub fn slice_rows(self, start: usize, len: usize) -> Result<Var<'t>> {
        let out = {
            let v = self.value();
            let (rows, cols) = v.dims()?;
            if len == 0 || start + len > rows {
                return Err(Error::Contract(format!(
                    "row slice {start}..{} of a {rows}-row value",
                    start + len
                )));
            }
            Tensor::matrix(len, cols, v.data()[start * cols..(start + len) * cols].to_vec())?
        };
        let rg = self.tape.requires(&[self.id]);
        self.tape.push(out, Op::SliceRows { src: self.id, start }, rg, "slice_rows")
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax_rows(x: &Tensor) -> Result<Tensor> {
    let (_, cols) = x.dims()?;
    let mut out = x.clone();
    for row in out.data_mut().chunks_mut(cols) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
        for v in row.iter_mut() {
            *v /= z;
        }
    }
    Ok(out)
}
