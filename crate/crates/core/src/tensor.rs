//! Dense `f64` tensors and a reverse-mode autodiff tape.
//!
//! The tape is a Wengert list: every operation appends one node holding its
//! forward value and the ids of its inputs, so append order is a topological
//! order and `backward` is a single reverse sweep. Forward values double as
//! the saved activations for the backward rules.
//!
//! Only scalar-by-tensor broadcasting is supported.

use smallvec::SmallVec;
use thiserror::Error;

pub type Shape = SmallVec<[usize; 2]>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("{len} elements do not fill shape {shape:?}")]
    BadShape { shape: Vec<usize>, len: usize },
    #[error("backward needs a scalar output, got shape {0:?}")]
    NonScalarOutput(Vec<usize>),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("flat parameter vector has length {got}, expected {expected}")]
    FlatLength { got: usize, expected: usize },
}

/// Row-major dense tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self, TensorError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(TensorError::BadShape { shape: shape.to_vec(), len: data.len() });
        }
        Ok(Self { shape: Shape::from_slice(shape), data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self { shape: Shape::from_slice(shape), data: vec![0.0; n] }
    }

    pub fn scalar(value: f64) -> Self {
        Self { shape: Shape::new(), data: vec![value] }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        let mut shape = Shape::new();
        shape.push(data.len());
        Self { shape, data }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, TensorError> {
        Self::new(&[rows, cols], data)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { shape: SmallVec::from_slice(&[n, n]), data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1 && self.shape.iter().all(|&d| d == 1)
    }

    pub fn item(&self) -> f64 {
        self.data[0]
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    fn same_shape(&self, other: &Tensor) -> bool {
        self.shape == other.shape
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Tanh,
    Sigmoid,
    Relu,
    Exp,
    Ln,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Binary(BinaryOp, Var, Var),
    Unary(UnaryOp, Var),
    /// `scale * x + offset`; only the scale matters for backward.
    ScaleShift(Var, f64),
    Clamp(Var, f64, f64),
    MatVec(Var, Var),
    Affine(Var, Var, Var),
    Sum(Var),
    LinComb(Vec<(Var, f64)>),
    Concat(Var, Var),
    LogSoftmax(Var),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Append-only record of a forward computation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn with_capacity(n: usize) -> Self {
        Self { nodes: Vec::with_capacity(n) }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every node recorded after `len`. Used to discard rejected
    /// solver steps; any `Var` at or past `len` becomes invalid.
    pub fn truncate(&mut self, len: usize) {
        self.nodes.truncate(len);
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Records a leaf (parameter or constant input).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn constant_vec(&mut self, data: Vec<f64>) -> Var {
        self.leaf(Tensor::vector(data))
    }

    fn binary(&mut self, op: BinaryOp, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let f = |x: f64, y: f64| match op {
            BinaryOp::Add => x + y,
            BinaryOp::Sub => x - y,
            BinaryOp::Mul => x * y,
        };
        let value = if ta.same_shape(tb) {
            let data = ta.data.iter().zip(&tb.data).map(|(&x, &y)| f(x, y)).collect();
            Tensor { shape: ta.shape.clone(), data }
        } else if ta.is_scalar() {
            let x = ta.data[0];
            Tensor { shape: tb.shape.clone(), data: tb.data.iter().map(|&y| f(x, y)).collect() }
        } else if tb.is_scalar() {
            let y = tb.data[0];
            Tensor { shape: ta.shape.clone(), data: ta.data.iter().map(|&x| f(x, y)).collect() }
        } else {
            return Err(TensorError::ShapeMismatch {
                left: ta.shape.to_vec(),
                right: tb.shape.to_vec(),
            });
        };
        Ok(self.push(value, Op::Binary(op, a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary(BinaryOp::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary(BinaryOp::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary(BinaryOp::Mul, a, b)
    }

    pub fn elementwise(&mut self, op: BinaryOp, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary(op, a, b)
    }

    pub fn unary(&mut self, op: UnaryOp, a: Var) -> Var {
        let t = &self.nodes[a.0].value;
        let f: fn(f64) -> f64 = match op {
            UnaryOp::Neg => |x| -x,
            UnaryOp::Tanh => f64::tanh,
            UnaryOp::Sigmoid => sigmoid,
            UnaryOp::Relu => |x| if x > 0.0 { x } else { 0.0 },
            UnaryOp::Exp => f64::exp,
            UnaryOp::Ln => f64::ln,
        };
        let value = Tensor { shape: t.shape.clone(), data: t.data.iter().map(|&x| f(x)).collect() };
        self.push(value, Op::Unary(op, a))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary(UnaryOp::Neg, a)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(UnaryOp::Tanh, a)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(UnaryOp::Sigmoid, a)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(UnaryOp::Relu, a)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(UnaryOp::Exp, a)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        self.unary(UnaryOp::Ln, a)
    }

    /// `scale * a + offset`, elementwise.
    pub fn scale_shift(&mut self, a: Var, scale: f64, offset: f64) -> Var {
        let t = &self.nodes[a.0].value;
        let value = Tensor {
            shape: t.shape.clone(),
            data: t.data.iter().map(|&x| scale * x + offset).collect(),
        };
        self.push(value, Op::ScaleShift(a, scale))
    }

    pub fn scale(&mut self, a: Var, scale: f64) -> Var {
        self.scale_shift(a, scale, 0.0)
    }

    /// `1 - a`
    pub fn one_minus(&mut self, a: Var) -> Var {
        self.scale_shift(a, -1.0, 1.0)
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let t = &self.nodes[a.0].value;
        let value =
            Tensor { shape: t.shape.clone(), data: t.data.iter().map(|&x| x.clamp(lo, hi)).collect() };
        self.push(value, Op::Clamp(a, lo, hi))
    }

    fn check_matvec(&self, w: Var, x: Var) -> Result<(usize, usize), TensorError> {
        let (tw, tx) = (&self.nodes[w.0].value, &self.nodes[x.0].value);
        if tw.shape.len() != 2 || tx.shape.len() != 1 || tw.shape[1] != tx.shape[0] {
            return Err(TensorError::ShapeMismatch {
                left: tw.shape.to_vec(),
                right: tx.shape.to_vec(),
            });
        }
        Ok((tw.shape[0], tw.shape[1]))
    }

    fn matvec_value(w: &Tensor, x: &Tensor, rows: usize, cols: usize) -> Vec<f64> {
        let mut out = vec![0.0; rows];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &w.data[i * cols..(i + 1) * cols];
            *o = row.iter().zip(&x.data).map(|(a, b)| a * b).sum();
        }
        out
    }

    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var, TensorError> {
        let (rows, cols) = self.check_matvec(w, x)?;
        let data = Self::matvec_value(&self.nodes[w.0].value, &self.nodes[x.0].value, rows, cols);
        Ok(self.push(Tensor::vector(data), Op::MatVec(w, x)))
    }

    /// `w · x + b` in one node.
    pub fn affine(&mut self, w: Var, x: Var, b: Var) -> Result<Var, TensorError> {
        let (rows, cols) = self.check_matvec(w, x)?;
        let tb = &self.nodes[b.0].value;
        if tb.shape.len() != 1 || tb.shape[0] != rows {
            return Err(TensorError::ShapeMismatch { left: vec![rows], right: tb.shape.to_vec() });
        }
        let mut data =
            Self::matvec_value(&self.nodes[w.0].value, &self.nodes[x.0].value, rows, cols);
        for (o, bi) in data.iter_mut().zip(&self.nodes[b.0].value.data) {
            *o += bi;
        }
        Ok(self.push(Tensor::vector(data), Op::Affine(w, x, b)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.nodes[a.0].value.data.iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.nodes[a.0].value.len() as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// `Σ cᵢ·xᵢ` over same-shaped inputs.
    pub fn lincomb(&mut self, terms: &[(Var, f64)]) -> Result<Var, TensorError> {
        let first = terms.first().expect("lincomb needs at least one term").0;
        let shape = self.nodes[first.0].value.shape.clone();
        let mut data = vec![0.0; self.nodes[first.0].value.len()];
        for &(v, c) in terms {
            let t = &self.nodes[v.0].value;
            if t.shape != shape {
                return Err(TensorError::ShapeMismatch { left: shape.to_vec(), right: t.shape.to_vec() });
            }
            if c != 0.0 {
                for (o, x) in data.iter_mut().zip(&t.data) {
                    *o += c * x;
                }
            }
        }
        Ok(self.push(Tensor { shape, data }, Op::LinComb(terms.to_vec())))
    }

    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if ta.shape.len() != 1 || tb.shape.len() != 1 {
            return Err(TensorError::ShapeMismatch { left: ta.shape.to_vec(), right: tb.shape.to_vec() });
        }
        let mut data = Vec::with_capacity(ta.len() + tb.len());
        data.extend_from_slice(&ta.data);
        data.extend_from_slice(&tb.data);
        Ok(self.push(Tensor::vector(data), Op::Concat(a, b)))
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let t = &self.nodes[a.0].value;
        let max = t.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + t.data.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        let value = Tensor { shape: t.shape.clone(), data: t.data.iter().map(|x| x - lse).collect() };
        self.push(value, Op::LogSoftmax(a))
    }

    /// Inputs of ReLU nodes, flattened in tape order. Used by the gradient
    /// checker to detect coordinates whose perturbation crosses a kink.
    pub fn relu_signature(&self) -> Vec<bool> {
        let mut sig = Vec::new();
        for node in &self.nodes {
            if let Op::Unary(UnaryOp::Relu, x) = node.op {
                sig.extend(self.nodes[x.0].value.data.iter().map(|&v| v > 0.0));
            }
        }
        sig
    }

    /// Reverse sweep from a scalar output.
    pub fn backward(&self, output: Var) -> Result<Gradients, TensorError> {
        let out = &self.nodes[output.0].value;
        if !out.is_scalar() {
            return Err(TensorError::NonScalarOutput(out.shape.to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; output.0 + 1];
        grads[output.0] = Some(vec![1.0]);

        for id in (0..=output.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            match &node.op {
                Op::Leaf => {
                    grads[id] = Some(g);
                }
                Op::Binary(op, a, b) => {
                    let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let (ga, gb): (Vec<f64>, Vec<f64>) = match op {
                        BinaryOp::Add => (g.clone(), g),
                        BinaryOp::Sub => (g.clone(), g.iter().map(|x| -x).collect()),
                        BinaryOp::Mul => {
                            let ga = g.iter().enumerate().map(|(i, gi)| gi * bval(tb, i)).collect();
                            let gb = g.iter().enumerate().map(|(i, gi)| gi * bval(ta, i)).collect();
                            (ga, gb)
                        }
                    };
                    accumulate_reduced(&mut grads, *a, ta.len(), &ga);
                    accumulate_reduced(&mut grads, *b, tb.len(), &gb);
                }
                Op::Unary(op, a) => {
                    let x = &self.nodes[a.0].value.data;
                    let y = &node.value.data;
                    let ga: Vec<f64> = match op {
                        UnaryOp::Neg => g.iter().map(|v| -v).collect(),
                        UnaryOp::Tanh => g.iter().zip(y).map(|(gi, yi)| gi * (1.0 - yi * yi)).collect(),
                        UnaryOp::Sigmoid => {
                            g.iter().zip(y).map(|(gi, yi)| gi * yi * (1.0 - yi)).collect()
                        }
                        UnaryOp::Relu => {
                            g.iter().zip(x).map(|(gi, xi)| if *xi > 0.0 { *gi } else { 0.0 }).collect()
                        }
                        UnaryOp::Exp => g.iter().zip(y).map(|(gi, yi)| gi * yi).collect(),
                        UnaryOp::Ln => g.iter().zip(x).map(|(gi, xi)| gi / xi).collect(),
                    };
                    accumulate(&mut grads, *a, &ga);
                }
                Op::ScaleShift(a, s) => {
                    let ga: Vec<f64> = g.iter().map(|v| v * s).collect();
                    accumulate(&mut grads, *a, &ga);
                }
                Op::Clamp(a, lo, hi) => {
                    let x = &self.nodes[a.0].value.data;
                    let ga: Vec<f64> = g
                        .iter()
                        .zip(x)
                        .map(|(gi, xi)| if *xi > *lo && *xi < *hi { *gi } else { 0.0 })
                        .collect();
                    accumulate(&mut grads, *a, &ga);
                }
                Op::MatVec(w, x) | Op::Affine(w, x, _) => {
                    let tw = &self.nodes[w.0].value;
                    let tx = &self.nodes[x.0].value;
                    let (rows, cols) = (tw.shape[0], tw.shape[1]);
                    let gw = grads[w.0].get_or_insert_with(|| vec![0.0; rows * cols]);
                    for i in 0..rows {
                        let gi = g[i];
                        if gi != 0.0 {
                            let row = &mut gw[i * cols..(i + 1) * cols];
                            for (r, xj) in row.iter_mut().zip(&tx.data) {
                                *r += gi * xj;
                            }
                        }
                    }
                    let gx = grads[x.0].get_or_insert_with(|| vec![0.0; cols]);
                    for i in 0..rows {
                        let gi = g[i];
                        if gi != 0.0 {
                            let row = &tw.data[i * cols..(i + 1) * cols];
                            for (o, wij) in gx.iter_mut().zip(row) {
                                *o += gi * wij;
                            }
                        }
                    }
                    if let Op::Affine(_, _, b) = &node.op {
                        accumulate(&mut grads, *b, &g);
                    }
                }
                Op::Sum(a) => {
                    let n = self.nodes[a.0].value.len();
                    let ga = vec![g[0]; n];
                    accumulate(&mut grads, *a, &ga);
                }
                Op::LinComb(terms) => {
                    for &(v, c) in terms {
                        if c != 0.0 {
                            let gv = grads[v.0].get_or_insert_with(|| vec![0.0; g.len()]);
                            for (o, gi) in gv.iter_mut().zip(&g) {
                                *o += c * gi;
                            }
                        }
                    }
                }
                Op::Concat(a, b) => {
                    let na = self.nodes[a.0].value.len();
                    accumulate(&mut grads, *a, &g[..na]);
                    accumulate(&mut grads, *b, &g[na..]);
                }
                Op::LogSoftmax(a) => {
                    let total: f64 = g.iter().sum();
                    let ga: Vec<f64> =
                        g.iter().zip(&node.value.data).map(|(gi, yi)| gi - yi.exp() * total).collect();
                    accumulate(&mut grads, *a, &ga);
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn bval(t: &Tensor, i: usize) -> f64 {
    if t.data.len() == 1 {
        t.data[0]
    } else {
        t.data[i]
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, g: &[f64]) {
    match &mut grads[v.0] {
        Some(acc) => {
            for (a, x) in acc.iter_mut().zip(g) {
                *a += x;
            }
        }
        slot @ None => *slot = Some(g.to_vec()),
    }
}

/// Accumulates `g` into `v`, summing over the broadcast dimension when `v`
/// was a scalar operand.
fn accumulate_reduced(grads: &mut [Option<Vec<f64>>], v: Var, len: usize, g: &[f64]) {
    if len == g.len() {
        accumulate(grads, v, g);
    } else {
        let s: f64 = g.iter().sum();
        accumulate(grads, v, &[s]);
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

/// Result of a reverse sweep.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient with respect to `v`; zero when `v` did not influence the output.
    pub fn get(&self, tape: &Tape, v: Var) -> Tensor {
        let shape = tape.value(v).shape.clone();
        match self.grads.get(v.0).and_then(|g| g.as_ref()) {
            Some(g) => Tensor { shape, data: g.clone() },
            None => {
                let n = tape.value(v).len();
                Tensor { shape, data: vec![0.0; n] }
            }
        }
    }

    /// Adds the gradients of `vars` (in order) into a flat buffer.
    pub fn accumulate_flat(&self, tape: &Tape, vars: &[Var], scale: f64, out: &mut [f64]) {
        let mut offset = 0;
        for &v in vars {
            let n = tape.value(v).len();
            if let Some(g) = self.grads.get(v.0).and_then(|g| g.as_ref()) {
                for (o, gi) in out[offset..offset + n].iter_mut().zip(g) {
                    *o += scale * gi;
                }
            }
            offset += n;
        }
    }

    pub fn flat(&self, tape: &Tape, vars: &[Var]) -> Vec<f64> {
        let n = vars.iter().map(|&v| tape.value(v).len()).sum();
        let mut out = vec![0.0; n];
        self.accumulate_flat(tape, vars, 1.0, &mut out);
        out
    }
}

/// Named parameter tensors with a flat view for optimizers.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        let name = name.into();
        if let Some(slot) = self.entries.iter_mut().find(|(n, _)| *n == name) {
            slot.1 = value;
        } else {
            self.entries.push((name, value));
        }
    }

    pub fn get(&self, name: &str) -> Result<&Tensor, TensorError> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| TensorError::UnknownParam(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor, TensorError> {
        self.entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| TensorError::UnknownParam(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.numel());
        for (_, t) in &self.entries {
            out.extend_from_slice(t.data());
        }
        out
    }

    pub fn unflatten(&mut self, flat: &[f64]) -> Result<(), TensorError> {
        let expected = self.numel();
        if flat.len() != expected {
            return Err(TensorError::FlatLength { got: flat.len(), expected });
        }
        let mut offset = 0;
        for (_, t) in &mut self.entries {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Locates the tensor and in-tensor offset of flat coordinate `i`.
    pub fn locate(&self, mut i: usize) -> Option<(&str, usize)> {
        for (n, t) in &self.entries {
            if i < t.len() {
                return Some((n.as_str(), i));
            }
            i -= t.len();
        }
        None
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries.iter().map(|(_, t)| t.data().iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt()
    }

    /// Records every parameter as a leaf; returned vars follow insertion order.
    pub fn attach(&self, tape: &mut Tape) -> Vec<Var> {
        self.entries.iter().map(|(_, t)| tape.leaf(t.clone())).collect()
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        Self::new()
    }
}

/// Outcome of comparing reverse-mode gradients with central differences.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(parameter name, in-tensor index)` of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    /// Coordinates skipped because a ±ε perturbation flips a ReLU.
    pub skipped: Vec<usize>,
    pub passed: bool,
}

/// Compares tape gradients of `f` against central finite differences.
///
/// The relative error per coordinate is `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn grad_check<F>(f: F, params: &ParamSet, epsilon: f64, rel_tol: f64) -> Result<GradCheckReport, TensorError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, TensorError>,
{
    let mut tape = Tape::new();
    let vars = params.attach(&mut tape);
    let out = f(&mut tape, &vars)?;
    let analytic = tape.backward(out)?.flat(&tape, &vars);

    let base = params.flatten();
    let mut work = params.clone();
    let mut eval = |flat: &[f64]| -> Result<(f64, Vec<bool>), TensorError> {
        work.unflatten(flat)?;
        let mut t = Tape::new();
        let v = work.attach(&mut t);
        let o = f(&mut t, &v)?;
        Ok((t.value(o).item(), t.relu_signature()))
    };

    let mut numeric = vec![0.0; base.len()];
    let mut skipped = Vec::new();
    let mut max_rel_error = 0.0_f64;
    let mut worst = None;
    let mut probe = base.clone();
    for i in 0..base.len() {
        probe[i] = base[i] + epsilon;
        let (plus, sig_plus) = eval(&probe)?;
        probe[i] = base[i] - epsilon;
        let (minus, sig_minus) = eval(&probe)?;
        probe[i] = base[i];
        numeric[i] = (plus - minus) / (2.0 * epsilon);
        if sig_plus != sig_minus {
            skipped.push(i);
            continue;
        }
        let (a, n) = (analytic[i], numeric[i]);
        let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
        if rel > max_rel_error {
            max_rel_error = rel;
            worst = params.locate(i).map(|(name, k)| (name.to_string(), k));
        }
    }
    Ok(GradCheckReport {
        max_rel_error,
        worst,
        analytic,
        numeric,
        skipped,
        passed: max_rel_error < rel_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_leaf(tape: &mut Tape, v: &[f64]) -> Var {
        tape.leaf(Tensor::vector(v.to_vec()))
    }

    #[test]
    fn elementwise_examples() {
        let mut tape = Tape::new();
        let z = vec_leaf(&mut tape, &[0.0; 3]);
        let t = tape.tanh(z);
        assert_eq!(tape.value(t).data(), &[0.0; 3]);

        let a = vec_leaf(&mut tape, &[1.0, 2.0]);
        let b = vec_leaf(&mut tape, &[3.0, 4.0]);
        let s = tape.add(a, b).unwrap();
        assert_eq!(tape.value(s).data(), &[4.0, 6.0]);

        let zero = tape.leaf(Tensor::scalar(0.0));
        let sg = tape.sigmoid(zero);
        assert_eq!(tape.value(sg).item(), 0.5);
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let mut tape = Tape::new();
        let a = vec_leaf(&mut tape, &[1.0, 2.0]);
        let b = vec_leaf(&mut tape, &[1.0, 2.0, 3.0]);
        let err = tape.add(a, b).unwrap_err();
        assert_eq!(err, TensorError::ShapeMismatch { left: vec![2], right: vec![3] });
        assert!(err.to_string().contains("[2]") && err.to_string().contains("[3]"));
    }

    #[test]
    fn scalar_broadcast_and_its_gradient() {
        let mut tape = Tape::new();
        let s = tape.leaf(Tensor::scalar(2.0));
        let v = vec_leaf(&mut tape, &[1.0, 2.0, 3.0]);
        let p = tape.mul(s, v).unwrap();
        assert_eq!(tape.value(p).data(), &[2.0, 4.0, 6.0]);
        let out = tape.sum(p);
        let g = tape.backward(out).unwrap();
        assert_eq!(g.get(&tape, s).item(), 6.0);
        assert_eq!(g.get(&tape, v).data(), &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn matvec_examples() {
        let mut tape = Tape::new();
        let id = tape.leaf(Tensor::identity(3));
        let v = vec_leaf(&mut tape, &[1.0, 2.0, 3.0]);
        let r = tape.matvec(id, v).unwrap();
        assert_eq!(tape.value(r).data(), &[1.0, 2.0, 3.0]);

        let z = tape.leaf(Tensor::zeros(&[2, 3]));
        let r = tape.matvec(z, v).unwrap();
        assert_eq!(tape.value(r).data(), &[0.0, 0.0]);

        let w = tape.leaf(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let ones = vec_leaf(&mut tape, &[1.0, 1.0]);
        let r = tape.matvec(w, ones).unwrap();
        assert_eq!(tape.value(r).data(), &[3.0, 7.0]);

        assert!(tape.matvec(w, v).is_err());
    }

    #[test]
    fn square_gradient_matches_central_difference() {
        let f = |x: f64| x * x;
        let fd = (f(3.0 + 1e-6) - f(3.0 - 1e-6)) / 2e-6;
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(3.0));
        let y = tape.mul(x, x).unwrap();
        let g = tape.backward(y).unwrap().get(&tape, x).item();
        assert!((g - 6.0).abs() < 1e-12);
        assert!((g - fd).abs() < 1e-6);
    }

    #[test]
    fn tanh_sum_gradient_at_zero_is_ones() {
        let mut tape = Tape::new();
        let x = vec_leaf(&mut tape, &[0.0; 4]);
        let t = tape.tanh(x);
        let s = tape.sum(t);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(&tape, x).data(), &[1.0; 4]);
    }

    #[test]
    fn disconnected_leaf_gets_zero_gradient() {
        let mut tape = Tape::new();
        let x = vec_leaf(&mut tape, &[1.0, 2.0]);
        let p = vec_leaf(&mut tape, &[5.0, 6.0]);
        let s = tape.sum(x);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(&tape, p).data(), &[0.0, 0.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut tape = Tape::new();
        let x = vec_leaf(&mut tape, &[1.0, 2.0]);
        assert!(matches!(tape.backward(x), Err(TensorError::NonScalarOutput(_))));
    }

    #[test]
    fn truncate_discards_tail() {
        let mut tape = Tape::new();
        let x = vec_leaf(&mut tape, &[1.0]);
        let mark = tape.len();
        let _ = tape.exp(x);
        tape.truncate(mark);
        assert_eq!(tape.len(), 1);
    }

    #[test]
    fn param_set_flat_roundtrip() {
        let mut p = ParamSet::new();
        p.insert("w", Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        p.insert("b", Tensor::vector(vec![5.0, 6.0]));
        let flat = p.flatten();
        assert_eq!(flat, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mut q = p.clone();
        q.unflatten(&flat).unwrap();
        assert_eq!(p, q);
        assert_eq!(q.locate(5), Some(("b", 1)));
        assert!(q.unflatten(&[1.0]).is_err());
        assert!(p.get("nope").is_err());
    }

    #[test]
    fn grad_check_linear_and_constant() {
        let mut p = ParamSet::new();
        p.insert("x", Tensor::vector(vec![0.3, -0.7, 1.1]));
        let linear = |t: &mut Tape, v: &[Var]| {
            let c = t.constant_vec(vec![2.0, -1.0, 0.5]);
            let m = t.mul(c, v[0])?;
            Ok(t.sum(m))
        };
        let r = grad_check(linear, &p, 1e-5, 1e-8).unwrap();
        assert!(r.passed, "linear max rel err {}", r.max_rel_error);

        let constant = |t: &mut Tape, _v: &[Var]| Ok(t.leaf(Tensor::scalar(4.0)));
        let r = grad_check(constant, &p, 1e-5, 1e-8).unwrap();
        assert!(r.analytic.iter().chain(&r.numeric).all(|&g| g == 0.0));
    }

    #[test]
    fn log_softmax_and_clamp_gradients() {
        let mut p = ParamSet::new();
        p.insert("x", Tensor::vector(vec![0.2, -0.4, 0.9]));
        let f = |t: &mut Tape, v: &[Var]| {
            let l = t.log_softmax(v[0]);
            let w = t.constant_vec(vec![1.0, 0.0, 0.0]);
            let picked = t.mul(l, w)?;
            let c = t.clamp(v[0], -0.5, 0.5);
            let e = t.exp(c);
            let a = t.sum(picked);
            let b = t.sum(e);
            t.add(a, b)
        };
        let r = grad_check(f, &p, 1e-5, 1e-6).unwrap();
        assert!(r.passed, "{r:?}");
    }
}
