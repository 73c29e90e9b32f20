//! Acceptance suite: one PASS/FAIL line per criterion, then the assertion.
//! Criteria run one at a time so reported wall times are comparable.

use denots_core::interp::CubicSpline;
use denots_core::rng::{indexed_substream, substream};
use denots_core::solver::{integrate_fn, SolverConfig};
use denots_core::tensor::{grad_check, ParamSet, Tape, Tensor, Var};
use denots_lab::studies::{
    AssumptionMc, AttackOrdering, BumpScale, Forgetting, Iss, L2VsScale, NfeSweep, NormStudy, Robustness,
    SinemixBench, SplineError, Study,
};
use rand::Rng;
use std::sync::Mutex;
use std::time::{Duration, Instant};

static SERIAL: Mutex<()> = Mutex::new(());

fn verdict(id: u32, name: &str, budget: Duration, passed: bool, detail: String, started: Instant) {
    let elapsed = started.elapsed();
    println!(
        "criterion {id:>2} {name}: {} ({detail}; {:.1}s of {}s budget)",
        if passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
}

fn run_default<S: Study>() -> (S::Config, S::Report) {
    let cfg = S::Config::default();
    let report = S::run(&cfg, 0).expect("study runs");
    (cfg, report)
}

fn minutes(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

#[test]
fn criterion_01_autodiff_matches_finite_differences() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for k in 0..100u64 {
        let mut rng = indexed_substream(0, "networks", k);
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let (inp, hid, out) = (3, 5, 2);
        let mut p = ParamSet::new();
        p.insert("w1", Tensor::matrix(hid, inp, draw(hid * inp)).unwrap());
        p.insert("b1", Tensor::vector(draw(hid)));
        p.insert("w2", Tensor::matrix(out, hid, draw(out * hid)).unwrap());
        p.insert("b2", Tensor::vector(draw(out)));
        let x = draw(inp);
        let target = draw(out);
        let rep = grad_check(
            |t: &mut Tape, v: &[Var]| {
                let xi = t.constant_vec(x.clone());
                let a = t.affine(v[0], xi, v[1])?;
                let h = t.tanh(a);
                let o = t.affine(v[2], h, v[3])?;
                let y = t.constant_vec(target.clone());
                let r = t.sub(o, y)?;
                let sq = t.mul(r, r)?;
                Ok(t.sum(sq))
            },
            &p,
            1e-5,
            1e-4,
        )
        .unwrap();
        worst = worst.max(rep.max_rel_error);
    }
    let passed = worst < 1e-4;
    verdict(1, "autodiff", minutes(1), passed, format!("max rel error {worst:.2e} over 100 networks"), start);
    assert!(passed);
}

#[test]
fn criterion_02_dopri5_order_and_adaptive_accuracy() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let decay = |_: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = -y[0];
        Ok(())
    };
    let exact = (-1.0f64).exp();
    let errors: Vec<f64> = [0.2, 0.1, 0.05, 0.025]
        .iter()
        .map(|&h| {
            let cfg = SolverConfig { fixed_step: Some(h), ..SolverConfig::default() };
            (integrate_fn(decay, &[1.0], 0.0, 1.0, &cfg).unwrap().final_state[0] - exact).abs()
        })
        .collect();
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let adaptive = integrate_fn(decay, &[1.0], 0.0, 1.0, &SolverConfig::with_tolerance(1e-3)).unwrap().final_state[0];
    let passed = ratios.iter().all(|&r| r >= 16.0) && (adaptive - exact).abs() < 1e-2;
    verdict(2, "solver order", minutes(1), passed, format!("halving ratios {ratios:.1?}, adaptive error {:.1e}", (adaptive - exact).abs()), start);
    assert!(passed);
}

/// Second derivative of a natural cubic spline through `(t, y)` at the knots,
/// from the tridiagonal moment equations solved by Thomas elimination.
fn reference_moments(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let k = n - 2;
    let (mut diag, mut rhs) = (vec![0.0; k], vec![0.0; k]);
    let mut upper = vec![0.0; k];
    for i in 0..k {
        diag[i] = 2.0 * (h[i] + h[i + 1]);
        upper[i] = h[i + 1];
        rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h[i + 1] - (y[i + 1] - y[i]) / h[i]);
    }
    for i in 1..k {
        let w = h[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    m[k] = rhs[k - 1] / diag[k - 1];
    for i in (0..k - 1).rev() {
        m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
    }
    m
}

#[test]
fn criterion_03_spline_oracle_and_invariants() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let hat = CubicSpline::fit(&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.0]).unwrap();
    let oracle_ok = (hat.value(0.5) - 0.6875).abs() < 1e-10 && (hat.value(1.5) - 0.6875).abs() < 1e-10;
    let mut rng = substream(0, "channels");
    let mut failures = 0;
    for _ in 0..1000 {
        let n = rng.random_range(3..40);
        let mut t = vec![0.0];
        for _ in 1..n {
            let last = *t.last().unwrap();
            t.push(last + rng.random_range(0.05..1.0));
        }
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = CubicSpline::fit(&t, &y).unwrap();
        let knots = t.iter().zip(&y).all(|(a, b)| (s.value(*a) - b).abs() < 1e-10);
        let moments = reference_moments(&t, &y);
        // One-sided derivatives at interior knots meet the reference slope and moment.
        let eps = 1e-9;
        let smooth = (1..n - 1).all(|k| {
            let (hl, hr) = (t[k] - t[k - 1], t[k + 1] - t[k]);
            let left_slope = (y[k] - y[k - 1]) / hl + hl * (moments[k - 1] + 2.0 * moments[k]) / 6.0;
            let right_slope = (y[k + 1] - y[k]) / hr - hr * (2.0 * moments[k] + moments[k + 1]) / 6.0;
            let slope_tol = 1e-8 * (1.0 + left_slope.abs()) + 2.0 * eps * (1.0 + moments[k].abs());
            let third = ((moments[k + 1] - moments[k]) / hr).abs().max(((moments[k] - moments[k - 1]) / hl).abs());
            let m_tol = 1e-7 * (1.0 + moments[k].abs()) + 2.0 * eps * third;
            (left_slope - right_slope).abs() < 1e-8 * (1.0 + left_slope.abs())
                && (s.derivative(t[k] - eps) - left_slope).abs() < slope_tol
                && (s.derivative(t[k] + eps) - right_slope).abs() < slope_tol
                && (s.second_derivative(t[k] - eps) - moments[k]).abs() < m_tol
                && (s.second_derivative(t[k] + eps) - moments[k]).abs() < m_tol
        });
        let natural = s.second_derivative(t[0]).abs() < 1e-9 && s.second_derivative(t[n - 1]).abs() < 1e-9;
        if !(knots && smooth && natural) {
            failures += 1;
        }
    }
    let passed = oracle_ok && failures == 0;
    verdict(3, "spline", minutes(1), passed, format!("hat oracle {oracle_ok}, {failures} of 1000 channels failed"), start);
    assert!(passed);
}

#[test]
fn criterion_04_bump_time_scaling() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (cfg, r) = run_default::<BumpScale>();
    let passed = BumpScale::passed(&cfg, &r);
    let detail = format!("AUROC default {:.3}, tolerance {:.3}, scale {:.3}", r.mean_default, r.mean_tolerance, r.mean_scale);
    verdict(4, "bump", minutes(30), passed, detail, start);
    assert!(r.mean_scale - r.mean_default >= 0.10 && r.mean_scale >= 0.92);
}

#[test]
fn criterion_05_sinemix_memory() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (cfg, r) = run_default::<SinemixBench>();
    let passed = SinemixBench::passed(&cfg, &r);
    let detail = r
        .summary
        .iter()
        .map(|s| format!("{:?} mean {:.3} min {:.3}", s.backbone, s.mean_r2, s.min_r2))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(5, "sinemix", minutes(30), passed, detail, start);
    assert!(passed);
}

#[test]
fn criterion_06_sine2_nfe_correlation() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (cfg, r) = run_default::<NfeSweep>();
    let passed = NfeSweep::passed(&cfg, &r);
    let detail = r
        .sweeps
        .iter()
        .map(|s| format!("{} pearson {:.2} spearman {:.2}", s.field, s.pearson, s.spearman))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(6, "sine-2 nfe", minutes(120), passed, detail, start);
    assert!(passed);
}

#[test]
fn criterion_07_trajectory_stability() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (cfg, r) = run_default::<NormStudy>();
    let passed = NormStudy::passed(&cfg, &r);
    let sync_max = r.trained.rows.iter().filter(|x| x.kind == denots_core::dynamics::FieldKind::SyncNf).map(|x| x.max_abs_component).fold(0.0, f64::max);
    let detail = format!("sync max |h_i| {sync_max:.3}, anti stable {}, no-nf growth {:?}", r.anti_stable, r.no_nf_growth);
    verdict(7, "stability", minutes(30), passed, detail, start);
    assert!(passed);
}

#[test]
fn criterion_08_iss_bound() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (cfg, r) = run_default::<Iss>();
    assert_eq!(r.cases.len(), 100);
    let worst = r.cases.iter().map(|c| c.max_norm / c.bound).fold(0.0, f64::max);
    let passed = Iss::passed(&cfg, &r);
    verdict(8, "iss", minutes(5), passed, format!("{} violations, worst norm/bound {worst:.3}", r.violations), start);
    assert!(passed);
}

#[test]
fn criterion_09_robustness_tightness() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (cfg, r) = run_default::<Robustness>();
    let t = &r.tightness;
    let within = (t.measured_gap - 4.0).abs() <= 0.05 * 4.0;
    let below = t.max_gap <= t.pointwise_bound * (1.0 + 1e-9);
    let passed = within && below && Robustness::passed(&cfg, &r);
    let detail = format!("gap at t={} is {:.4}, max gap {:.4} vs bound {:.4}", t.t, t.measured_gap, t.max_gap, t.pointwise_bound);
    verdict(9, "robustness", minutes(1), passed, detail, start);
    assert!(passed);
}

#[test]
fn criterion_10_forgetting() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (cfg, r) = run_default::<Forgetting>();
    assert_eq!(r.cases.len(), 100);
    let monotone = r.cases.iter().filter(|c| c.strictly_decreasing).count();
    let passed = Forgetting::passed(&cfg, &r);
    let detail = format!("{monotone}/100 strictly decreasing, pure-decay error {:.1e}", r.pure_decay_max_error);
    verdict(10, "forgetting", minutes(5), passed, detail, start);
    assert!(passed);
}

#[test]
fn criterion_11_spline_error_constant() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (cfg, r) = run_default::<SplineError>();
    assert!(cfg.mc.n_paths >= 200 && cfg.mc.xi * cfg.deltas.iter().cloned().fold(0.0, f64::max) <= 0.01);
    let theory = 4.0 * std::f64::consts::PI.powi(4) * 3f64.sqrt() / 63.0;
    let close = r.estimates.iter().all(|e| (e.normalized / theory - 1.0).abs() <= 0.25);
    let passed = close && (3.5..=4.5).contains(&r.exponent) && SplineError::passed(&cfg, &r);
    let normalized: Vec<f64> = r.estimates.iter().map(|e| e.normalized).collect();
    verdict(11, "spline error", minutes(30), passed, format!("normalized {normalized:.3?} vs {theory:.4}, exponent {:.3}", r.exponent), start);
    assert!(passed);
}

#[test]
fn criterion_12_assumption_monte_carlo() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (cfg, r) = run_default::<AssumptionMc>();
    assert_eq!(r.iterations, 1000);
    let passed = AssumptionMc::passed(&cfg, &r);
    verdict(12, "assumption mc", minutes(5), passed, format!("{} failures in {} iterations", r.failures, r.iterations), start);
    assert_eq!(r.failures, 0);
}

#[test]
fn criterion_13_attack_ordering() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (cfg, r) = run_default::<AttackOrdering>();
    assert_eq!(cfg.study.attack_seeds.len() * cfg.study.model_seeds.len(), 15);
    let passed = AttackOrdering::passed(&cfg, &r);
    let detail = r.summary.iter().map(|s| format!("{} attacked R² {:.3}", s.kind, s.attacked)).collect::<Vec<_>>().join(", ");
    verdict(13, "attack ordering", minutes(60), passed, detail, start);
    assert!(passed);
}

#[test]
fn criterion_14_weight_norm_trend() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (cfg, r) = run_default::<L2VsScale>();
    let passed = L2VsScale::passed(&cfg, &r) && r.spearman <= -0.5;
    verdict(14, "weight norm", minutes(60), passed, format!("means {:.3?}, spearman {:.2}", r.means, r.spearman), start);
    assert!(passed);
}
