//! Input-to-state stability, robustness gaps and forgetting curves.

use crate::constrained::ConstrainedField;
use denots_core::solver::{integrate, FnSystem, SolverConfig, SolverError};
use serde::{Deserialize, Serialize};

/// Smooth input path `t ↦ x(t)`.
pub type InputPath<'a> = &'a dyn Fn(f64, &mut [f64]);

pub fn tight_solver() -> SolverConfig {
    SolverConfig { rtol: 1e-10, atol: 1e-12, ..SolverConfig::default() }
}

/// Uniform sample grid `(0, horizon]` with `samples` points.
pub fn sample_times(horizon: f64, samples: usize) -> Vec<f64> {
    (1..=samples).map(|k| horizon * k as f64 / samples as f64).collect()
}

fn solve(
    dim: usize,
    rhs: impl FnMut(f64, &[f64], &mut [f64]),
    y0: Vec<f64>,
    times: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<Vec<f64>>, SolverError> {
    let mut rhs = rhs;
    let mut sys = FnSystem::new(|t: f64, y: &[f64], dy: &mut [f64]| {
        rhs(t, y, dy);
        Ok(())
    });
    debug_assert_eq!(y0.len(), dim);
    Ok(integrate(&mut sys, y0, 0.0, times, cfg)?.samples)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCheckConfig {
    /// Margin `ε ∈ (0, 1)` of the Lyapunov level `χ₀ / (1 − ε)`.
    pub epsilon: f64,
    /// Sup-norm bound of the input path.
    pub x_max: f64,
    pub horizon: f64,
    pub samples: usize,
    /// Relative slack over `max(‖h0‖, χ₀)`.
    pub slack: f64,
}

impl Default for LyapunovCheckConfig {
    fn default() -> Self {
        Self { epsilon: 0.01, x_max: 1.0, horizon: 50.0, samples: 200, slack: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IssReport {
    /// `a·L_x·X_max / (b − a·L_h)`.
    pub chi0: f64,
    /// `χ₀ / (1 − ε)`.
    pub chi_epsilon: f64,
    pub bound: f64,
    pub max_norm: f64,
    pub norms: Vec<(f64, f64)>,
    pub violations: usize,
    pub passed: bool,
}

pub fn iss_level(field: &ConstrainedField, x_max: f64) -> f64 {
    field.gain() * x_max
}

/// Integrates the field under `input` from `h0` and checks
/// `‖h(t)‖₂ ≤ max(‖h0‖₂, χ₀(X_max))·(1 + slack)` at every sample.
pub fn iss_check(
    field: &ConstrainedField,
    cfg: &LyapunovCheckConfig,
    input: InputPath<'_>,
    h0: &[f64],
) -> Result<IssReport, SolverError> {
    let chi0 = iss_level(field, cfg.x_max);
    let bound = norm(h0).max(chi0) * (1.0 + cfg.slack);
    let times = sample_times(cfg.horizon, cfg.samples);
    let mut x = vec![0.0; field.input_dim()];
    let states = solve(
        field.hidden_dim(),
        |t, h, dh| {
            input(t, &mut x);
            field.rhs(&x, h, dh);
        },
        h0.to_vec(),
        &times,
        &tight_solver(),
    )?;
    let norms: Vec<(f64, f64)> = times.iter().zip(&states).map(|(&t, h)| (t, norm(h))).collect();
    let max_norm = norms.iter().map(|p| p.1).fold(norm(h0), f64::max);
    let violations = norms.iter().filter(|p| p.1 > bound).count();
    Ok(IssReport {
        chi0,
        chi_epsilon: chi0 / (1.0 - cfg.epsilon),
        bound,
        max_norm,
        norms,
        violations,
        passed: violations == 0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    /// `‖h(T) − h*(T)‖²`.
    pub pointwise_gap: f64,
    /// `sup_t ‖x̂(t) − x*(t)‖²` over the sample grid.
    pub pointwise_discrepancy: f64,
    /// `gain² · pointwise_discrepancy`.
    pub pointwise_bound: f64,
    /// `(1/n) ∫ ‖h − h*‖² dt` with `n` observation intervals.
    pub interval_gap: f64,
    /// Largest `∫_{t_k}^{t_{k+1}} ‖x̂ − x*‖² dt` over the observation intervals.
    pub interval_discrepancy: f64,
    pub interval_bound: f64,
    /// Largest `‖h(t) − h*(t)‖²` over the samples, against the pointwise bound.
    pub max_gap: f64,
    pub passed: bool,
}

fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2).zip(y.windows(2)).map(|(tw, yw)| 0.5 * (tw[1] - tw[0]) * (yw[0] + yw[1])).sum()
}

/// Integrates the field under two inputs from a shared `h0` and compares the
/// hidden-state gap with the pointwise and interval bounds. `grid` holds the
/// observation times `0 = t_1 < … < t_n = T`; `per_interval` samples per interval.
pub fn robustness_gap(
    field: &ConstrainedField,
    x_hat: InputPath<'_>,
    x_star: InputPath<'_>,
    h0: &[f64],
    grid: &[f64],
    per_interval: usize,
) -> Result<RobustnessReport, SolverError> {
    let v = field.hidden_dim();
    let u = field.input_dim();
    let mut times = Vec::new();
    for w in grid.windows(2) {
        for j in 1..=per_interval {
            times.push(w[0] + (w[1] - w[0]) * j as f64 / per_interval as f64);
        }
    }
    let (mut xa, mut xb) = (vec![0.0; u], vec![0.0; u]);
    let mut y0 = h0.to_vec();
    y0.extend_from_slice(h0);
    let states = solve(
        2 * v,
        |t, y, dy| {
            x_hat(t, &mut xa);
            x_star(t, &mut xb);
            let (da, db) = dy.split_at_mut(v);
            field.rhs(&xa, &y[..v], da);
            field.rhs(&xb, &y[v..], db);
        },
        y0,
        &times,
        &tight_solver(),
    )?;
    let gap = |y: &[f64]| (0..v).map(|i| (y[i] - y[v + i]).powi(2)).sum::<f64>();
    let disc = |t: f64, xa: &mut [f64], xb: &mut [f64]| {
        x_hat(t, xa);
        x_star(t, xb);
        xa.iter().zip(xb.iter()).map(|(p, q)| (p - q).powi(2)).sum::<f64>()
    };
    let mut all_t = vec![grid[0]];
    all_t.extend(&times);
    let mut gaps = vec![0.0];
    gaps.extend(states.iter().map(|y| gap(y)));
    let discs: Vec<f64> = all_t.iter().map(|&t| disc(t, &mut xa, &mut xb)).collect();

    let pointwise_discrepancy = discs.iter().copied().fold(0.0, f64::max);
    let mut interval_discrepancy: f64 = 0.0;
    for k in 0..grid.len() - 1 {
        let lo = k * per_interval;
        let hi = lo + per_interval + 1;
        interval_discrepancy = interval_discrepancy.max(trapezoid(&all_t[lo..hi], &discs[lo..hi]));
    }
    let n = (grid.len() - 1).max(1) as f64;
    let gain2 = field.gain().powi(2);
    let pointwise_gap = *gaps.last().expect("non-empty");
    let max_gap = gaps.iter().copied().fold(0.0, f64::max);
    let interval_gap = trapezoid(&all_t, &gaps) / n;
    let pointwise_bound = gain2 * pointwise_discrepancy;
    let interval_bound = gain2 * interval_discrepancy;
    let tol = 1e-9 * (1.0 + pointwise_bound);
    Ok(RobustnessReport {
        pointwise_gap,
        pointwise_discrepancy,
        pointwise_bound,
        interval_gap,
        interval_discrepancy,
        interval_bound,
        max_gap,
        passed: max_gap <= pointwise_bound + tol && interval_gap <= interval_bound + tol,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TightnessReport {
    pub epsilon: f64,
    pub t: f64,
    pub measured_gap: f64,
    pub closed_form_gap: f64,
    /// `(A − B)² / ε²`.
    pub limit: f64,
    pub pointwise_bound: f64,
    pub max_gap: f64,
}

/// Constant inputs `x̂ ≡ A`, `x* ≡ B` through [`ConstrainedField::tightness_example`].
pub fn tightness(a_input: f64, b_input: f64, epsilon: f64, t_end: f64) -> Result<TightnessReport, SolverError> {
    let field = ConstrainedField::tightness_example(epsilon);
    let xa = move |_: f64, x: &mut [f64]| x[0] = a_input;
    let xb = move |_: f64, x: &mut [f64]| x[0] = b_input;
    let grid: Vec<f64> = (0..=40).map(|k| t_end * k as f64 / 40.0).collect();
    let rep = robustness_gap(&field, &xa, &xb, &[0.0], &grid, 10)?;
    let closed = ((a_input - b_input) * (1.0 - (-epsilon * t_end).exp()) / epsilon).powi(2);
    Ok(TightnessReport {
        epsilon,
        t: t_end,
        measured_gap: rep.pointwise_gap,
        closed_form_gap: closed,
        limit: ((a_input - b_input) / epsilon).powi(2),
        pointwise_bound: rep.pointwise_bound,
        max_gap: rep.max_gap,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForgettingCurve {
    /// `(τ, ‖Δh(τ)‖₂ / δ)`.
    pub points: Vec<(f64, f64)>,
    pub strictly_decreasing: bool,
}

/// Finite-difference sensitivity `‖h(τ; h0 + δ·e_i) − h(τ; h0)‖₂ / δ` for a
/// generic right-hand side `rhs(t, h, dh)`.
pub fn forgetting_curve(
    dim: usize,
    rhs: &mut dyn FnMut(f64, &[f64], &mut [f64]),
    h0: &[f64],
    coord: usize,
    delta: f64,
    horizon: f64,
    samples: usize,
    cfg: &SolverConfig,
) -> Result<ForgettingCurve, SolverError> {
    let times = sample_times(horizon, samples);
    let mut y0 = h0.to_vec();
    y0.extend_from_slice(h0);
    y0[dim + coord] += delta;
    let states = solve(
        2 * dim,
        |t, y, dy| {
            let (da, db) = dy.split_at_mut(dim);
            rhs(t, &y[..dim], da);
            rhs(t, &y[dim..], db);
        },
        y0,
        &times,
        cfg,
    )?;
    let mut points = vec![(0.0, 1.0)];
    points.extend(times.iter().zip(&states).map(|(&t, y)| {
        let d: f64 = (0..dim).map(|i| (y[dim + i] - y[i]).powi(2)).sum::<f64>().sqrt();
        (t, d / delta)
    }));
    let strictly_decreasing = points.windows(2).all(|w| w[1].1 < w[0].1);
    Ok(ForgettingCurve { points, strictly_decreasing })
}

pub fn forgetting_decay(
    field: &ConstrainedField,
    input: InputPath<'_>,
    h0: &[f64],
    coord: usize,
    delta: f64,
    horizon: f64,
    samples: usize,
) -> Result<ForgettingCurve, SolverError> {
    let mut x = vec![0.0; field.input_dim()];
    let mut rhs = |t: f64, h: &[f64], dh: &mut [f64]| {
        input(t, &mut x);
        field.rhs(&x, h, dh);
    };
    forgetting_curve(field.hidden_dim(), &mut rhs, h0, coord, delta, horizon, samples, &tight_solver())
}
