//! Monte Carlo sweeps over random constrained fields and full-model fields.

use crate::constrained::ConstrainedField;
use crate::spline_error::{scaling_exponent, spline_error_mc, SplineErrorConfig, SplineErrorEstimate};
use crate::stability::{
    forgetting_curve, forgetting_decay, iss_check, robustness_gap, tightness, ForgettingCurve, LyapunovCheckConfig,
    TightnessReport,
};
use denots_core::dynamics::{FieldKind, VectorField};
use denots_core::interp::InterpError;
use denots_core::rng::{indexed_substream, substream};
use denots_core::solver::{SolverConfig, SolverError};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Smooth random path with `‖x(t)‖₂ ≤ x_max` for all `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundedPath {
    /// Per channel: `(amplitude, angular frequency, phase)` terms.
    terms: Vec<Vec<(f64, f64, f64)>>,
}

impl BoundedPath {
    pub fn random<R: Rng + ?Sized>(channels: usize, x_max: f64, rng: &mut R) -> Self {
        let per_channel = x_max / (channels as f64).sqrt();
        let terms = (0..channels)
            .map(|_| {
                let raw: Vec<(f64, f64, f64)> = (0..3)
                    .map(|_| (rng.random::<f64>(), rng.random_range(0.1..3.0), rng.random_range(0.0..2.0 * PI)))
                    .collect();
                let total: f64 = raw.iter().map(|c| c.0).sum::<f64>().max(f64::MIN_POSITIVE);
                raw.into_iter().map(|(c, w, p)| (per_channel * c / total, w, p)).collect()
            })
            .collect();
        Self { terms }
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) {
        for (o, terms) in out.iter_mut().zip(&self.terms) {
            *o = terms.iter().map(|&(c, w, p)| c * (w * t + p).sin()).sum();
        }
    }
}

fn random_vector<R: Rng + ?Sized>(dim: usize, norm: f64, rng: &mut R) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    v.into_iter().map(|x| x * norm / n).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IssSweepConfig {
    pub fields: usize,
    pub hidden: usize,
    pub input: usize,
    pub min_margin: f64,
    /// Horizon in multiples of the decay time `1 / (b − a·L_h)`.
    pub decay_times: f64,
    pub check: LyapunovCheckConfig,
}

impl Default for IssSweepConfig {
    fn default() -> Self {
        Self { fields: 100, hidden: 4, input: 2, min_margin: 0.05, decay_times: 10.0, check: LyapunovCheckConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IssCase {
    pub index: usize,
    pub margin: f64,
    pub h0_norm: f64,
    pub chi0: f64,
    pub bound: f64,
    pub max_norm: f64,
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IssSweepReport {
    pub cases: Vec<IssCase>,
    pub violations: usize,
    pub passed: bool,
}

/// Random assumption-2 fields under random bounded inputs, from random `h0`
/// with norm up to twice the ISS level.
pub fn iss_sweep(cfg: &IssSweepConfig, seed: u64) -> Result<IssSweepReport, SolverError> {
    let mut cases = Vec::with_capacity(cfg.fields);
    for index in 0..cfg.fields {
        let mut rng = indexed_substream(seed, "iss", index as u64);
        let field = ConstrainedField::random_stable(cfg.hidden, cfg.input, cfg.min_margin, &mut rng);
        let path = BoundedPath::random(cfg.input, cfg.check.x_max, &mut rng);
        let level = field.gain() * cfg.check.x_max;
        let h0_norm = rng.random_range(0.0..2.0) * level;
        let h0 = random_vector(cfg.hidden, h0_norm, &mut rng);
        let check = LyapunovCheckConfig { horizon: cfg.decay_times / field.margin(), ..cfg.check };
        let rep = iss_check(&field, &check, &|t, x| path.eval(t, x), &h0)?;
        cases.push(IssCase {
            index,
            margin: field.margin(),
            h0_norm,
            chi0: rep.chi0,
            bound: rep.bound,
            max_norm: rep.max_norm,
            violations: rep.violations,
        });
    }
    let violations = cases.iter().map(|c| c.violations).sum();
    Ok(IssSweepReport { cases, violations, passed: violations == 0 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForgettingSweepConfig {
    pub configs: usize,
    pub hidden: usize,
    pub input: usize,
    pub min_margin: f64,
    pub delta: f64,
    /// Horizon in multiples of the fastest decay time `1 / (b + a·L_h)`, so the
    /// perturbation stays above floating-point resolution.
    pub decay_times: f64,
    pub samples: usize,
}

impl Default for ForgettingSweepConfig {
    fn default() -> Self {
        Self { configs: 100, hidden: 4, input: 2, min_margin: 0.05, delta: 1e-4, decay_times: 5.0, samples: 50 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForgettingCase {
    pub index: usize,
    pub margin: f64,
    pub coord: usize,
    pub final_sensitivity: f64,
    pub strictly_decreasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForgettingSweepReport {
    pub cases: Vec<ForgettingCase>,
    /// `a = 0` curve against `e^{−bτ}`.
    pub pure_decay_max_error: f64,
    pub passed: bool,
}

pub fn forgetting_sweep(cfg: &ForgettingSweepConfig, seed: u64) -> Result<ForgettingSweepReport, SolverError> {
    let mut cases = Vec::with_capacity(cfg.configs);
    for index in 0..cfg.configs {
        let mut rng = indexed_substream(seed, "forgetting", index as u64);
        let field = ConstrainedField::random_stable(cfg.hidden, cfg.input, cfg.min_margin, &mut rng);
        let path = BoundedPath::random(cfg.input, 1.0, &mut rng);
        let h0 = random_vector(cfg.hidden, rng.random_range(0.0..1.0), &mut rng);
        let coord = rng.random_range(0..cfg.hidden);
        let horizon = cfg.decay_times / (field.b + field.a * field.l_h());
        let curve = forgetting_decay(&field, &|t, x| path.eval(t, x), &h0, coord, cfg.delta, horizon, cfg.samples)?;
        cases.push(ForgettingCase {
            index,
            margin: field.margin(),
            coord,
            final_sensitivity: curve.points.last().map_or(1.0, |p| p.1),
            strictly_decreasing: curve.strictly_decreasing,
        });
    }
    let pure_decay_max_error = pure_decay_error(cfg, seed)?;
    let passed = cases.iter().all(|c| c.strictly_decreasing) && pure_decay_max_error < 1e-6;
    Ok(ForgettingSweepReport { cases, pure_decay_max_error, passed })
}

/// Largest deviation of the `a = 0` sensitivity curve from `e^{−bτ}`.
fn pure_decay_error(cfg: &ForgettingSweepConfig, seed: u64) -> Result<f64, SolverError> {
    let mut rng = substream(seed, "forgetting/pure-decay");
    let mut field = ConstrainedField::random_stable(cfg.hidden, cfg.input, cfg.min_margin, &mut rng);
    field.a = 0.0;
    let b = field.b;
    let h0 = random_vector(cfg.hidden, 0.5, &mut rng);
    let path = BoundedPath::random(cfg.input, 1.0, &mut rng);
    let curve = forgetting_decay(&field, &|t, x| path.eval(t, x), &h0, 0, cfg.delta, cfg.decay_times / b, cfg.samples)?;
    Ok(curve.points.iter().map(|&(t, s)| (s - (-b * t).exp()).abs()).fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateForgettingConfig {
    pub hidden: usize,
    pub input: usize,
    /// Update-gate input bias; strongly negative drives `z` toward 0.
    pub gate_bias: f64,
    pub delta: f64,
    pub horizon: f64,
    pub samples: usize,
}

impl Default for GateForgettingConfig {
    fn default() -> Self {
        Self { hidden: 8, input: 1, gate_bias: -20.0, delta: 1e-4, horizon: 10.0, samples: 50 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateForgettingReport {
    pub anti_nf: ForgettingCurve,
    pub sync_nf: ForgettingCurve,
    /// Anti-NF sensitivity stays above Sync-NF's at the horizon.
    pub anti_slower: bool,
}

/// Sensitivity curves of Anti-NF and Sync-NF fields sharing one random
/// initialization, with the update gate saturated.
pub fn gate_saturated_forgetting(cfg: &GateForgettingConfig, seed: u64) -> Result<GateForgettingReport, SolverError> {
    let mut rng = substream(seed, "gate-forgetting");
    let base = VectorField::init(FieldKind::AntiNf, cfg.input, cfg.hidden, &mut rng);
    let mut params = base.params().clone();
    params.get_mut("b_iz").expect("gru field").data_mut().fill(cfg.gate_bias);
    let path = BoundedPath::random(cfg.input, 1.0, &mut rng);
    let h0 = random_vector(cfg.hidden, 0.5, &mut rng);
    let solver = SolverConfig { rtol: 1e-10, atol: 1e-12, ..SolverConfig::default() };
    let curve = |kind: FieldKind| -> Result<ForgettingCurve, SolverError> {
        let field = VectorField::from_params(kind, cfg.input, cfg.hidden, params.clone()).expect("matching shapes");
        let mut ev = field.evaluator();
        let mut x = vec![0.0; cfg.input];
        let mut rhs = |t: f64, h: &[f64], dh: &mut [f64]| {
            path.eval(t, &mut x);
            ev.eval(&x, h, dh).expect("consistent dimensions");
        };
        forgetting_curve(cfg.hidden, &mut rhs, &h0, 0, cfg.delta, cfg.horizon, cfg.samples, &solver)
    };
    let anti_nf = curve(FieldKind::AntiNf)?;
    let sync_nf = curve(FieldKind::SyncNf)?;
    let last = |c: &ForgettingCurve| c.points.last().map_or(1.0, |p| p.1);
    let anti_slower = last(&anti_nf) > last(&sync_nf);
    Ok(GateForgettingReport { anti_nf, sync_nf, anti_slower })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessStudyConfig {
    pub cases: usize,
    pub hidden: usize,
    pub input: usize,
    pub min_margin: f64,
    /// Sup-norm of the perturbation path added to the clean input.
    pub perturbation: f64,
    /// Observation intervals of the grid on `[0, T]`.
    pub intervals: usize,
    pub horizon: f64,
    pub tightness_a: f64,
    pub tightness_b: f64,
    pub tightness_epsilon: f64,
    pub tightness_t: f64,
    /// Relative tolerance of the tightness gap against `(A − B)² / ε²`.
    pub tightness_tolerance: f64,
}

impl Default for RobustnessStudyConfig {
    fn default() -> Self {
        Self {
            cases: 50,
            hidden: 4,
            input: 2,
            min_margin: 0.05,
            perturbation: 0.2,
            intervals: 20,
            horizon: 20.0,
            tightness_a: 2.0,
            tightness_b: 1.0,
            tightness_epsilon: 0.5,
            tightness_t: 40.0,
            tightness_tolerance: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessCase {
    pub index: usize,
    pub max_gap: f64,
    pub pointwise_bound: f64,
    pub interval_gap: f64,
    pub interval_bound: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessStudyReport {
    pub cases: Vec<RobustnessCase>,
    pub tightness: TightnessReport,
    /// Tightness gap within tolerance of the limit and below the pointwise bound.
    pub tightness_passed: bool,
    pub passed: bool,
}

/// Random fields driven by a clean and a perturbed path, plus the
/// constant-input tightness example.
pub fn robustness_study(cfg: &RobustnessStudyConfig, seed: u64) -> Result<RobustnessStudyReport, SolverError> {
    let grid: Vec<f64> = (0..=cfg.intervals).map(|k| cfg.horizon * k as f64 / cfg.intervals as f64).collect();
    let mut cases = Vec::with_capacity(cfg.cases);
    for index in 0..cfg.cases {
        let mut rng = indexed_substream(seed, "robustness", index as u64);
        let field = ConstrainedField::random_stable(cfg.hidden, cfg.input, cfg.min_margin, &mut rng);
        let clean = BoundedPath::random(cfg.input, 1.0, &mut rng);
        let noise = BoundedPath::random(cfg.input, cfg.perturbation, &mut rng);
        let h0 = random_vector(cfg.hidden, rng.random_range(0.0..1.0), &mut rng);
        let perturbed = |t: f64, x: &mut [f64]| {
            clean.eval(t, x);
            let mut n = vec![0.0; x.len()];
            noise.eval(t, &mut n);
            x.iter_mut().zip(&n).for_each(|(a, b)| *a += b);
        };
        let rep = robustness_gap(&field, &|t, x| clean.eval(t, x), &perturbed, &h0, &grid, 10)?;
        cases.push(RobustnessCase {
            index,
            max_gap: rep.max_gap,
            pointwise_bound: rep.pointwise_bound,
            interval_gap: rep.interval_gap,
            interval_bound: rep.interval_bound,
            passed: rep.passed,
        });
    }
    let t = tightness(cfg.tightness_a, cfg.tightness_b, cfg.tightness_epsilon, cfg.tightness_t)?;
    let tightness_passed = (t.measured_gap - t.limit).abs() <= cfg.tightness_tolerance * t.limit
        && t.max_gap <= t.pointwise_bound * (1.0 + 1e-9);
    let passed = tightness_passed && cases.iter().all(|c| c.passed);
    Ok(RobustnessStudyReport { cases, tightness: t, tightness_passed, passed })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplineStudyConfig {
    pub deltas: Vec<f64>,
    pub mc: SplineErrorConfig,
    /// Relative tolerance on the normalized constant.
    pub tolerance: f64,
    pub exponent_range: (f64, f64),
}

impl Default for SplineStudyConfig {
    fn default() -> Self {
        Self {
            deltas: vec![0.5, 1.0, 2.0],
            mc: SplineErrorConfig { xi: 0.005, ..SplineErrorConfig::default() },
            tolerance: 0.25,
            exponent_range: (3.5, 4.5),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplineStudyReport {
    pub estimates: Vec<SplineErrorEstimate>,
    pub exponent: f64,
    pub constant_within_tolerance: bool,
    pub exponent_in_range: bool,
}

/// One Monte Carlo estimate per grid step, each with its own substream.
pub fn spline_error_study(cfg: &SplineStudyConfig, seed: u64) -> Result<SplineStudyReport, InterpError> {
    let estimates = cfg
        .deltas
        .iter()
        .enumerate()
        .map(|(i, &delta)| {
            let mc = SplineErrorConfig { delta, ..cfg.mc.clone() };
            spline_error_mc(&mc, &mut indexed_substream(seed, "spline-error", i as u64))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let exponent = if estimates.len() >= 2 { scaling_exponent(&estimates) } else { f64::NAN };
    let constant_within_tolerance = estimates.iter().all(|e| e.relative_deviation.abs() <= cfg.tolerance);
    let exponent_in_range = exponent >= cfg.exponent_range.0 && exponent <= cfg.exponent_range.1;
    Ok(SplineStudyReport { estimates, exponent, constant_within_tolerance, exponent_in_range })
}
