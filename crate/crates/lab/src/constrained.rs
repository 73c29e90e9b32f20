//! The scalar-gated field `dh/dt = a·f(W_h h + W_x x) − b·h` used by the
//! stability, robustness and forgetting checks.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("W_h must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("W_x has {got} rows, expected {expected}")]
    RowMismatch { got: usize, expected: usize },
    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }
}

/// Largest singular value by power iteration on `WᵀW`.
pub fn spectral_norm(w: &DMatrix<f64>) -> f64 {
    if w.is_empty() {
        return 0.0;
    }
    let gram = w.transpose() * w;
    let n = gram.ncols();
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 + 1.0).sqrt().fract());
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..10_000 {
        let next = &gram * &v;
        let norm = next.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let estimate = v.dot(&next);
        v = next / norm;
        if (estimate - lambda).abs() <= 1e-15 * estimate.abs() {
            lambda = estimate;
            break;
        }
        lambda = estimate;
    }
    lambda.max(0.0).sqrt()
}

/// Gaussian matrix rescaled to spectral norm `target`.
pub fn random_with_norm<R: Rng + ?Sized>(rows: usize, cols: usize, target: f64, rng: &mut R) -> DMatrix<f64> {
    let w = DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng));
    let s = spectral_norm(&w);
    if s == 0.0 {
        w
    } else {
        w * (target / s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstrainedField {
    pub a: f64,
    pub b: f64,
    pub w_h: DMatrix<f64>,
    pub w_x: DMatrix<f64>,
    pub activation: Activation,
    l_h: f64,
    l_x: f64,
}

impl ConstrainedField {
    pub fn new(a: f64, b: f64, w_h: DMatrix<f64>, w_x: DMatrix<f64>, activation: Activation) -> Result<Self, FieldError> {
        if w_h.nrows() != w_h.ncols() {
            return Err(FieldError::NonSquare { rows: w_h.nrows(), cols: w_h.ncols() });
        }
        if w_x.nrows() != w_h.nrows() {
            return Err(FieldError::RowMismatch { got: w_x.nrows(), expected: w_h.nrows() });
        }
        for (name, value) in [("a", a), ("b", b)] {
            if !(value >= 0.0) {
                return Err(FieldError::Negative { name, value });
            }
        }
        let l_h = spectral_norm(&w_h);
        let l_x = spectral_norm(&w_x);
        Ok(Self { a, b, w_h, w_x, activation, l_h, l_x })
    }

    /// Random field with `a, b, L_h ∈ (0, 1)` and `a·L_h < b`, margin at least `min_margin`.
    pub fn random_stable<R: Rng + ?Sized>(hidden: usize, input: usize, min_margin: f64, rng: &mut R) -> Self {
        loop {
            let a: f64 = rng.random_range(0.05..0.95);
            let b: f64 = rng.random_range(0.05..0.95);
            let l_h_max = ((b - min_margin) / a).min(0.95);
            if l_h_max <= 0.05 {
                continue;
            }
            let l_h = rng.random_range(0.05..l_h_max);
            let l_x = rng.random_range(0.1..2.0);
            let w_h = random_with_norm(hidden, hidden, l_h, rng);
            let w_x = random_with_norm(hidden, input, l_x, rng);
            let field = Self::new(a, b, w_h, w_x, Activation::Tanh).expect("consistent shapes");
            if field.satisfies_assumptions() && field.margin() >= min_margin {
                return field;
            }
        }
    }

    /// The constant-input example whose robustness bound is attained:
    /// `a = 1`, `b = 1 + ε/2`, `W_h = 1 − ε/2`, `W_x = 1`, linear inner map.
    pub fn tightness_example(epsilon: f64) -> Self {
        let w_h = DMatrix::from_element(1, 1, 1.0 - epsilon / 2.0);
        let w_x = DMatrix::from_element(1, 1, 1.0);
        Self::new(1.0, 1.0 + epsilon / 2.0, w_h, w_x, Activation::Identity).expect("scalar example")
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_h.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.ncols()
    }

    pub fn l_h(&self) -> f64 {
        self.l_h
    }

    pub fn l_x(&self) -> f64 {
        self.l_x
    }

    /// `b − a·L_h`.
    pub fn margin(&self) -> f64 {
        self.b - self.a * self.l_h
    }

    /// `a, b, L_h ∈ (0, 1)` and `a·L_h < b`.
    pub fn satisfies_assumptions(&self) -> bool {
        let open = |v: f64| v > 0.0 && v < 1.0;
        open(self.a) && open(self.b) && open(self.l_h) && self.margin() > 0.0
    }

    /// `a·L_x / (b − a·L_h)`, the gain shared by the ISS level and the robustness bounds.
    pub fn gain(&self) -> f64 {
        self.a * self.l_x / self.margin()
    }

    /// Inner map `f(x, h)`; zero at the origin.
    pub fn inner(&self, x: &[f64], h: &[f64], out: &mut [f64]) {
        let v = self.hidden_dim();
        for i in 0..v {
            let mut z = 0.0;
            for j in 0..v {
                z += self.w_h[(i, j)] * h[j];
            }
            for (j, xj) in x.iter().enumerate() {
                z += self.w_x[(i, j)] * xj;
            }
            out[i] = self.activation.apply(z);
        }
    }

    pub fn rhs(&self, x: &[f64], h: &[f64], out: &mut [f64]) {
        self.inner(x, h, out);
        for (o, hi) in out.iter_mut().zip(h) {
            *o = self.a * *o - self.b * hi;
        }
    }
}
