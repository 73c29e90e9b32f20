use denots_core::datagen::{build, generate, DatasetKind, DatasetSpec, Irregularity};
use denots_core::dynamics::FieldKind;
use denots_core::experiment::{run_experiment, ExperimentConfig};
use denots_core::interp::{CubicSpline, SplinePath};
use denots_core::metrics::{mse, r2};
use denots_core::model::{SequenceModel, Sncde, SncdeConfig, TaskKind};
use denots_core::rng::substream;
use denots_core::series::{Target, TimeSeries};
use denots_core::solver::SolverConfig;
use denots_core::tensor::{grad_check, GradCheckReport, BinaryOp, ParamSet, Tape, Tensor, UnaryOp, Var};
use denots_core::train::{batch_gradient, train, TrainConfig};
use proptest::prelude::*;

fn unit_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

/// Relative error with an absolute floor at finite-difference round-off.
fn within(rep: &GradCheckReport, rel: f64) -> bool {
    rep.analytic.iter().zip(&rep.numeric).enumerate().all(|(i, (a, n))| rep.skipped.contains(&i) || (a - n).abs() <= rel * a.abs().max(n.abs()) + 1e-8)
}

/// Limit at 0 of the cubic through `(s_k, d_k)`, by Neville extrapolation.
fn limit_at_zero(s: &[f64; 4], d: [f64; 4]) -> f64 {
    let mut p = d;
    for m in 1..4 {
        for i in 0..4 - m {
            p[i] = (s[i + m] * p[i] - s[i] * p[i + 1]) / (s[i + m] - s[i]);
        }
    }
    p[0]
}

fn params(entries: &[(&str, Vec<f64>)]) -> ParamSet {
    let mut p = ParamSet::new();
    for (name, v) in entries {
        p.insert(*name, Tensor::vector(v.clone()));
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unary_ops_match_finite_differences(x in unit_vec(5), op in 0usize..6) {
        let op = [UnaryOp::Neg, UnaryOp::Tanh, UnaryOp::Sigmoid, UnaryOp::Relu, UnaryOp::Exp, UnaryOp::Ln][op];
        prop_assume!(op != UnaryOp::Relu || x.iter().all(|v| v.abs() > 1e-4));
        let shifted: Vec<f64> = if op == UnaryOp::Ln { x.iter().map(|v| v + 2.0).collect() } else { x };
        let p = params(&[("x", shifted)]);
        let rep = grad_check(|t: &mut Tape, v: &[Var]| { let y = t.unary(op, v[0]); Ok(t.sum(y)) }, &p, 1e-6, 1e-4).unwrap();
        prop_assert!(within(&rep, 1e-4), "{op:?}: {}", rep.max_rel_error);
    }

    #[test]
    fn binary_and_linear_ops_match_finite_differences(a in unit_vec(4), b in unit_vec(4), w in unit_vec(12), c in unit_vec(3)) {
        let p = {
            let mut p = params(&[("a", a), ("b", b), ("c", c)]);
            p.insert("w", Tensor::matrix(3, 4, w).unwrap());
            p
        };
        let rep = grad_check(|t: &mut Tape, v: &[Var]| {
            let s = t.elementwise(BinaryOp::Add, v[0], v[1])?;
            let d = t.elementwise(BinaryOp::Sub, s, v[1])?;
            let m = t.elementwise(BinaryOp::Mul, d, v[1])?;
            let y = t.affine(v[3], m, v[2])?;
            let z = t.tanh(y);
            let q = t.concat(z, v[2])?;
            let l = t.log_softmax(q);
            let k = t.lincomb(&[(l, 0.5), (q, -1.5)])?;
            let e = t.scale_shift(k, 2.0, 1.0);
            Ok(t.mean(e))
        }, &p, 1e-6, 1e-4).unwrap();
        prop_assert!(within(&rep, 1e-4), "{}", rep.max_rel_error);
    }

    #[test]
    fn tape_replay_is_bit_identical(x in unit_vec(6)) {
        let run = || {
            let mut t = Tape::new();
            let v = t.leaf(Tensor::vector(x.clone()));
            let s = t.sigmoid(v);
            let m = t.mul(s, v).unwrap();
            let out = t.sum(m);
            let g = t.backward(out).unwrap().get(&t, v);
            (t.value(out).item(), g.into_data())
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn param_set_pack_unpack_is_identity(a in unit_vec(3), b in unit_vec(6), flat in unit_vec(9)) {
        let mut p = params(&[("a", a)]);
        p.insert("b", Tensor::matrix(2, 3, b).unwrap());
        let before = p.flatten();
        let mut q = p.clone();
        q.unflatten(&before).unwrap();
        prop_assert_eq!(&q, &p);
        q.unflatten(&flat).unwrap();
        prop_assert_eq!(q.flatten(), flat);
    }

    #[test]
    fn spline_interpolates_and_is_c2(gaps in prop::collection::vec(0.05f64..1.0, 3..12), ys in unit_vec(12)) {
        let mut t = vec![0.0];
        for g in &gaps {
            t.push(t.last().unwrap() + g);
        }
        let y = &ys[..t.len()];
        let s = CubicSpline::fit(&t, y).unwrap();
        for (tk, yk) in t.iter().zip(y) {
            prop_assert!((s.value(*tk) - yk).abs() < 1e-10);
        }
        let offsets = [0.01, 0.02, 0.03, 0.04];
        for &tk in &t[1..t.len() - 1] {
            let evals: [&dyn Fn(f64) -> f64; 3] = [&|x| s.value(x), &|x| s.derivative(x), &|x| s.second_derivative(x)];
            for (order, g) in evals.iter().enumerate() {
                let left = limit_at_zero(&offsets, offsets.map(|o| g(tk - o)));
                let right = limit_at_zero(&offsets, offsets.map(|o| g(tk + o)));
                prop_assert!((left - right).abs() < 1e-6 * (1.0 + left.abs()), "order {order} at {tk}: {left} vs {right}");
            }
        }
        prop_assert!(s.second_derivative(t[0]).abs() < 1e-9);
        prop_assert!(s.second_derivative(*t.last().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn path_is_channel_permutation_equivariant_and_ignores_missing(ys in prop::collection::vec(unit_vec(3), 6), drop in 1usize..5, q in 0.0f64..1.0) {
        let times: Vec<f64> = (0..6).map(|k| k as f64 * 0.2).collect();
        let series = TimeSeries::new(times.clone(), ys.clone(), Target::Regression(0.0)).unwrap();
        let permuted = TimeSeries::new(times.clone(), ys.iter().map(|r| vec![r[2], r[0], r[1]]).collect(), Target::Regression(0.0)).unwrap();
        let (a, b) = (SplinePath::fit(&series).unwrap(), SplinePath::fit(&permuted).unwrap());
        let x = q * times[5];
        let (va, vb) = (a.eval(x).unwrap(), b.eval(x).unwrap());
        prop_assert_eq!(vec![va[2], va[0], va[1]], vb);

        let mut holed = ys.clone();
        holed[drop][1] = f64::NAN;
        let with_gap = SplinePath::fit(&TimeSeries::new(times.clone(), holed, Target::Regression(0.0)).unwrap()).unwrap();
        let (kt, ky): (Vec<f64>, Vec<f64>) = (0..6).filter(|&k| k != drop).map(|k| (times[k], ys[k][1])).unzip();
        let reference = CubicSpline::fit(&kt, &ky).unwrap();
        prop_assert!((with_gap.eval(x).unwrap()[1] - reference.value(x)).abs() < 1e-12);
        prop_assert_eq!(with_gap.eval(x).unwrap()[0], va[0]);
    }

    #[test]
    fn decreasing_mse_never_decreases_r2(target in prop::collection::vec(-2.0f64..2.0, 8), noise in unit_vec(8), k in 0.0f64..1.0) {
        prop_assume!(target.iter().any(|v| (v - target[0]).abs() > 1e-3));
        let far: Vec<f64> = target.iter().zip(&noise).map(|(t, n)| t + n).collect();
        let near: Vec<f64> = target.iter().zip(&noise).map(|(t, n)| t + k * n).collect();
        prop_assert!(mse(&near, &target).unwrap() <= mse(&far, &target).unwrap() + 1e-15);
        prop_assert!(r2(&near, &target).unwrap() >= r2(&far, &target).unwrap() - 1e-12);
    }
}

#[test]
fn random_networks_match_finite_differences() {
    let mut rng = substream(11, "networks");
    use rand::Rng;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let draw = |n: usize, rng: &mut denots_core::rng::StreamRng| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let mut p = ParamSet::new();
        p.insert("w1", Tensor::matrix(4, 3, draw(12, &mut rng)).unwrap());
        p.insert("b1", Tensor::vector(draw(4, &mut rng)));
        p.insert("w2", Tensor::matrix(2, 4, draw(8, &mut rng)).unwrap());
        p.insert("b2", Tensor::vector(draw(2, &mut rng)));
        let x = draw(3, &mut rng);
        let rep = grad_check(
            |t: &mut Tape, v: &[Var]| {
                let xi = t.constant_vec(x.clone());
                let a = t.affine(v[0], xi, v[1])?;
                let h = t.tanh(a);
                let o = t.affine(v[2], h, v[3])?;
                let sq = t.mul(o, o)?;
                Ok(t.sum(sq))
            },
            &p,
            1e-5,
            1e-4,
        )
        .unwrap();
        worst = worst.max(rep.max_rel_error);
    }
    assert!(worst < 1e-4, "max rel error {worst}");
}

#[test]
fn end_to_end_gradient_matches_finite_differences() {
    let times: Vec<f64> = (0..5).map(|k| k as f64 * 0.25).collect();
    let series = TimeSeries::new(times.clone(), times.iter().map(|t| vec![(3.0 * t).sin(), t * t]).collect(), Target::Regression(0.4)).unwrap();
    for field in [FieldKind::AntiNf, FieldKind::SyncNf, FieldKind::NoNf, FieldKind::MlpTanh] {
        let cfg = SncdeConfig { field, hidden_dim: 4, scale: 2.0, solver: SolverConfig::with_tolerance(1e-6), ..SncdeConfig::default() };
        let mut model = Sncde::new(cfg, 2, &mut substream(3, "init"));
        let (_, grad, _) = batch_gradient(&model, &[&series]).unwrap();
        let p0 = model.flat_params();
        let eps = 1e-6;
        let scale = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        for i in 0..p0.len() {
            let mut p = p0.clone();
            p[i] += eps;
            model.set_flat_params(&p).unwrap();
            let up = batch_gradient(&model, &[&series]).unwrap().0;
            p[i] -= 2.0 * eps;
            model.set_flat_params(&p).unwrap();
            let down = batch_gradient(&model, &[&series]).unwrap().0;
            let fd = (up - down) / (2.0 * eps);
            // Step sizes are constants on the tape, so compare against the gradient scale.
            let rel = (fd - grad[i]).abs() / scale;
            assert!(rel < 1e-3, "{field} param {i}: fd {fd} ad {}", grad[i]);
        }
        model.set_flat_params(&p0).unwrap();
    }
}

#[test]
fn poisson_gaps_are_exponential() {
    let n = 10_001;
    let mut spec = DatasetSpec::new(DatasetKind::Bump, 1);
    spec.length = Some((n, n));
    spec.irregularity = Some(Irregularity::Poisson);
    spec.window = Some(1.0);
    let set = generate(&spec, 5).unwrap();
    let t = set[0].times();
    let rate = (n - 1) as f64;
    let mut gaps: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(f64::total_cmp);
    let m = gaps.len() as f64;
    let d = gaps
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let cdf = 1.0 - (-rate * g).exp();
            (cdf - i as f64 / m).abs().max(((i + 1) as f64 / m - cdf).abs())
        })
        .fold(0.0, f64::max);
    // Kolmogorov critical value at the 1% level.
    assert!(d < 1.628 / m.sqrt(), "KS statistic {d}");
}

#[test]
fn same_seed_gives_identical_history_and_splits() {
    let mut spec = DatasetSpec::new(DatasetKind::SineMix, 30);
    spec.length = Some((20, 20));
    assert_eq!(build(&spec, 4).unwrap(), build(&spec, 4).unwrap());
    let mut cfg = ExperimentConfig::new(spec);
    cfg.hidden_dim = 4;
    cfg.training.max_epochs = Some(3);
    cfg.seed = 4;
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.model.flat_params(), b.model.flat_params());
}

#[test]
fn patience_one_with_frozen_metric_stops_after_two_epochs() {
    let mut spec = DatasetSpec::new(DatasetKind::Bump, 20);
    spec.length = Some((10, 10));
    let splits = build(&spec, 0).unwrap();
    let cfg = SncdeConfig { hidden_dim: 2, task: TaskKind::Binary, ..SncdeConfig::default() };
    let mut model = Sncde::new(cfg, 1, &mut substream(0, "init"));
    model.fit_preprocessing(&splits.train);
    let training = TrainConfig { patience: 1, lr: 1e-300, batch_size: None, max_epochs: Some(50) };
    let out = train(model, &splits.train, &splits.val, &training, &mut substream(0, "shuffle")).unwrap();
    assert_eq!(out.history.len(), 2);
    assert_eq!(out.best_epoch, 1);
}
