//! GRU-based and MLP vector fields, time scaling, and the Lipschitz budget of
//! the time-scaled flow map.

use crate::series::TimeSeries;
use crate::tensor::{ParamSet, Tape, Tensor, TensorError, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("scale config needs positive values, got scale {scale} and normalizer {normalizer}")]
    InvalidScale { scale: f64, normalizer: f64 },
    #[error("`{name}` must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("unknown field kind `{0}` (expected no-nf, sync-nf, anti-nf, mlp-tanh or mlp-relu)")]
    UnknownKind(String),
    #[error("input has {got} entries, expected {expected}")]
    InputDim { got: usize, expected: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    NoNf,
    SyncNf,
    AntiNf,
    MlpTanh,
    MlpRelu,
}

impl FieldKind {
    pub const ALL: [FieldKind; 5] =
        [FieldKind::NoNf, FieldKind::SyncNf, FieldKind::AntiNf, FieldKind::MlpTanh, FieldKind::MlpRelu];

    pub fn is_gru(self) -> bool {
        matches!(self, FieldKind::NoNf | FieldKind::SyncNf | FieldKind::AntiNf)
    }

    pub fn name(self) -> &'static str {
        match self {
            FieldKind::NoNf => "no-nf",
            FieldKind::SyncNf => "sync-nf",
            FieldKind::AntiNf => "anti-nf",
            FieldKind::MlpTanh => "mlp-tanh",
            FieldKind::MlpRelu => "mlp-relu",
        }
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FieldKind {
    type Err = DynamicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FieldKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| DynamicsError::UnknownKind(s.to_string()))
    }
}

/// `t ← (scale / normalizer)·t`, where the normalizer is the median sequence duration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleConfig {
    pub scale: f64,
    pub normalizer: f64,
}

impl ScaleConfig {
    pub fn new(scale: f64, normalizer: f64) -> Result<Self, DynamicsError> {
        if !(scale > 0.0 && normalizer > 0.0) {
            return Err(DynamicsError::InvalidScale { scale, normalizer });
        }
        Ok(Self { scale, normalizer })
    }

    pub fn factor(&self) -> f64 {
        self.scale / self.normalizer
    }
}

pub fn scale_times(series: &TimeSeries, cfg: &ScaleConfig) -> TimeSeries {
    series.scaled(cfg.factor())
}

/// Median duration over a collection of series.
pub fn median_timeframe<'a>(series: impl IntoIterator<Item = &'a TimeSeries>) -> Option<f64> {
    let mut d: Vec<f64> = series.into_iter().map(TimeSeries::duration).collect();
    if d.is_empty() {
        return None;
    }
    d.sort_by(f64::total_cmp);
    let n = d.len();
    Some(if n % 2 == 1 { d[n / 2] } else { 0.5 * (d[n / 2 - 1] + d[n / 2]) })
}

/// Lipschitz constant `(mx/mh)(e^{mh·t} − 1)` of the flow map over horizon `t`.
pub fn lipschitz_budget(mx: f64, mh: f64, t: f64) -> Result<f64, DynamicsError> {
    for (name, value) in [("input Lipschitz constant", mx), ("hidden Lipschitz constant", mh), ("horizon", t)] {
        if !(value > 0.0) {
            return Err(DynamicsError::NonPositive { name, value });
        }
    }
    Ok(mx / mh * (mh * t).exp_m1())
}

/// Smallest hidden Lipschitz constant reaching `budget` over horizon `t`,
/// found by bisection (the budget is increasing in `mh`).
pub fn hidden_lipschitz_for_budget(budget: f64, mx: f64, t: f64) -> Result<f64, DynamicsError> {
    lipschitz_budget(mx, 1.0, t)?;
    if !(budget > mx * t) {
        return Err(DynamicsError::NonPositive { name: "budget surplus over mx·t", value: budget - mx * t });
    }
    let (mut lo, mut hi) = (1e-12, 1.0);
    while lipschitz_budget(mx, hi, t)? < budget {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if lipschitz_budget(mx, mid, t)? < budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

const GRU_NAMES: [&str; 12] =
    ["w_ir", "w_iz", "w_in", "w_hr", "w_hz", "w_hn", "b_ir", "b_iz", "b_in", "b_hr", "b_hz", "b_hn"];

/// Gate vectors of a GRU cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Gates {
    pub reset: Vec<f64>,
    pub update: Vec<f64>,
    pub candidate: Vec<f64>,
}

/// Parameterized `dh/dt = g(x, h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    kind: FieldKind,
    input_dim: usize,
    hidden_dim: usize,
    params: ParamSet,
}

impl VectorField {
    /// All-zero parameters.
    pub fn zeros(kind: FieldKind, input_dim: usize, hidden_dim: usize) -> Self {
        let (u, v) = (input_dim, hidden_dim);
        let mut params = ParamSet::new();
        if kind.is_gru() {
            for name in &GRU_NAMES[..3] {
                params.insert(*name, Tensor::zeros(&[v, u]));
            }
            for name in &GRU_NAMES[3..6] {
                params.insert(*name, Tensor::zeros(&[v, v]));
            }
            for name in &GRU_NAMES[6..] {
                params.insert(*name, Tensor::zeros(&[v]));
            }
        } else {
            params.insert("w1", Tensor::zeros(&[v, u + v]));
            params.insert("b1", Tensor::zeros(&[v]));
            params.insert("w2", Tensor::zeros(&[v, v]));
            params.insert("b2", Tensor::zeros(&[v]));
        }
        Self { kind, input_dim, hidden_dim, params }
    }

    /// Every weight and bias uniform in `[−1/√v, 1/√v]`.
    pub fn init<R: Rng + ?Sized>(kind: FieldKind, input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let mut field = Self::zeros(kind, input_dim, hidden_dim);
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        let mut flat = field.params.flatten();
        for w in &mut flat {
            *w = rng.random_range(-bound..=bound);
        }
        field.params.unflatten(&flat).expect("length preserved");
        field
    }

    pub fn from_params(
        kind: FieldKind,
        input_dim: usize,
        hidden_dim: usize,
        params: ParamSet,
    ) -> Result<Self, DynamicsError> {
        let mut field = Self::zeros(kind, input_dim, hidden_dim);
        let names: Vec<String> = field.params.names().map(str::to_string).collect();
        for name in names {
            let got = params.get(&name)?;
            let slot = field.params.get_mut(&name)?;
            if got.shape() != slot.shape() {
                return Err(TensorError::ShapeMismatch { left: slot.shape().to_vec(), right: got.shape().to_vec() }.into());
            }
            *slot = got.clone();
        }
        Ok(field)
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Records the parameters on `tape`; pass the result to [`Self::forward`].
    pub fn attach(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.attach(tape)
    }

    fn gru_gates_on(&self, tape: &mut Tape, p: &[Var], x: Var, h: Var) -> Result<(Var, Var, Var), TensorError> {
        let xr = tape.affine(p[0], x, p[6])?;
        let hr = tape.affine(p[3], h, p[9])?;
        let r_pre = tape.add(xr, hr)?;
        let r = tape.sigmoid(r_pre);
        let xz = tape.affine(p[1], x, p[7])?;
        let hz = tape.affine(p[4], h, p[10])?;
        let z_pre = tape.add(xz, hz)?;
        let z = tape.sigmoid(z_pre);
        let xn = tape.affine(p[2], x, p[8])?;
        let hn = tape.affine(p[5], h, p[11])?;
        let rhn = tape.mul(r, hn)?;
        let n_pre = tape.add(xn, rhn)?;
        let n = tape.tanh(n_pre);
        Ok((r, z, n))
    }

    /// Records `g(x, h)` on `tape` given attached parameter vars.
    pub fn forward(&self, tape: &mut Tape, p: &[Var], x: Var, h: Var) -> Result<Var, TensorError> {
        match self.kind {
            FieldKind::NoNf => {
                let (_, z, n) = self.gru_gates_on(tape, p, x, h)?;
                let keep = tape.one_minus(z);
                let a = tape.mul(keep, n)?;
                let b = tape.mul(z, h)?;
                tape.add(a, b)
            }
            FieldKind::SyncNf => {
                let (_, z, n) = self.gru_gates_on(tape, p, x, h)?;
                let keep = tape.one_minus(z);
                let diff = tape.sub(n, h)?;
                tape.mul(keep, diff)
            }
            FieldKind::AntiNf => {
                let neg_h = tape.neg(h);
                let (_, z, n) = self.gru_gates_on(tape, p, x, neg_h)?;
                let keep = tape.one_minus(z);
                let a = tape.mul(keep, n)?;
                let b = tape.mul(z, h)?;
                tape.sub(a, b)
            }
            FieldKind::MlpTanh | FieldKind::MlpRelu => {
                let xh = tape.concat(x, h)?;
                let pre1 = tape.affine(p[0], xh, p[1])?;
                if self.kind == FieldKind::MlpTanh {
                    let a1 = tape.tanh(pre1);
                    let pre2 = tape.affine(p[2], a1, p[3])?;
                    Ok(tape.tanh(pre2))
                } else {
                    let a1 = tape.relu(pre1);
                    tape.affine(p[2], a1, p[3])
                }
            }
        }
    }

    fn check_dims(&self, x: &[f64], h: &[f64]) -> Result<(), DynamicsError> {
        if x.len() != self.input_dim {
            return Err(DynamicsError::InputDim { got: x.len(), expected: self.input_dim });
        }
        if h.len() != self.hidden_dim {
            return Err(DynamicsError::InputDim { got: h.len(), expected: self.hidden_dim });
        }
        Ok(())
    }

    /// Gates of the underlying GRU cell at `(x, h)`; `None` for MLP fields.
    pub fn gru_gates(&self, x: &[f64], h: &[f64]) -> Result<Option<Gates>, DynamicsError> {
        if !self.kind.is_gru() {
            return Ok(None);
        }
        self.check_dims(x, h)?;
        let mut tape = Tape::new();
        let p = self.attach(&mut tape);
        let xv = tape.constant_vec(x.to_vec());
        let hv = tape.constant_vec(h.to_vec());
        let (r, z, n) = self.gru_gates_on(&mut tape, &p, xv, hv)?;
        Ok(Some(Gates {
            reset: tape.value(r).data().to_vec(),
            update: tape.value(z).data().to_vec(),
            candidate: tape.value(n).data().to_vec(),
        }))
    }

    /// One-off evaluation of `g(x, h)`.
    pub fn eval(&self, x: &[f64], h: &[f64]) -> Result<Vec<f64>, DynamicsError> {
        let mut ev = self.evaluator();
        let mut out = vec![0.0; self.hidden_dim];
        ev.eval(x, h, &mut out)?;
        Ok(out)
    }

    pub fn evaluator(&self) -> FieldEvaluator<'_> {
        FieldEvaluator::new(self)
    }
}

/// Repeated plain evaluation through the same code path as the tape, with
/// parameters attached once to a scratch tape.
pub struct FieldEvaluator<'a> {
    field: &'a VectorField,
    tape: Tape,
    vars: Vec<Var>,
    mark: usize,
}

impl<'a> FieldEvaluator<'a> {
    pub fn new(field: &'a VectorField) -> Self {
        let mut tape = Tape::with_capacity(64);
        let vars = field.attach(&mut tape);
        let mark = tape.len();
        Self { field, tape, vars, mark }
    }

    pub fn eval(&mut self, x: &[f64], h: &[f64], out: &mut [f64]) -> Result<(), DynamicsError> {
        self.field.check_dims(x, h)?;
        self.tape.truncate(self.mark);
        let xv = self.tape.constant_vec(x.to_vec());
        let hv = self.tape.constant_vec(h.to_vec());
        let y = self.field.forward(&mut self.tape, &self.vars, xv, hv)?;
        out.copy_from_slice(self.tape.value(y).data());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scale_times_examples() {
        let s = TimeSeries::new(vec![0.0, 2.0, 4.0], vec![vec![1.0]; 3], crate::series::Target::Class(0)).unwrap();
        let cfg = ScaleConfig::new(10.0, 4.0).unwrap();
        assert_eq!(scale_times(&s, &cfg).times(), &[0.0, 5.0, 10.0]);
        let same = ScaleConfig::new(3.0, 3.0).unwrap();
        assert_eq!(scale_times(&s, &same).times(), s.times());
        assert!(ScaleConfig::new(0.0, 1.0).is_err());
    }

    #[test]
    fn zero_weight_fields() {
        let h = [0.3, -1.2, 2.0];
        let x = [0.7];
        let expect = [(FieldKind::NoNf, 0.5), (FieldKind::SyncNf, -0.5), (FieldKind::AntiNf, -0.5)];
        for (kind, c) in expect {
            let f = VectorField::zeros(kind, 1, 3);
            let g = f.eval(&x, &h).unwrap();
            for (gi, hi) in g.iter().zip(&h) {
                assert_eq!(*gi, c * hi, "{kind}");
            }
            let gates = f.gru_gates(&x, &h).unwrap().unwrap();
            assert!(gates.reset.iter().chain(&gates.update).all(|&v| v == 0.5));
            assert!(gates.candidate.iter().all(|&v| v == 0.0));
        }
        for kind in [FieldKind::MlpTanh, FieldKind::MlpRelu] {
            let f = VectorField::zeros(kind, 1, 3);
            assert_eq!(f.eval(&x, &h).unwrap(), vec![0.0; 3]);
        }
    }

    #[test]
    fn scalar_update_gate() {
        let mut f = VectorField::zeros(FieldKind::NoNf, 1, 1);
        f.params_mut().get_mut("w_iz").unwrap().data_mut()[0] = 1.0;
        let gates = f.gru_gates(&[3f64.ln()], &[0.0]).unwrap().unwrap();
        assert!((gates.update[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn anti_nf_matches_gates_of_negated_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = VectorField::init(FieldKind::AntiNf, 2, 4, &mut rng);
        let x = [0.4, -0.9];
        let h = [0.1, -0.5, 0.8, 0.3];
        let neg: Vec<f64> = h.iter().map(|v| -v).collect();
        let g = f.gru_gates(&x, &neg).unwrap().unwrap();
        let expected: Vec<f64> = (0..4).map(|i| (1.0 - g.update[i]) * g.candidate[i] - g.update[i] * h[i]).collect();
        assert_eq!(f.eval(&x, &h).unwrap(), expected);
    }

    #[test]
    fn saturated_anti_nf_is_pure_decay() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut f = VectorField::init(FieldKind::AntiNf, 1, 3, &mut rng);
        f.params_mut().get_mut("b_iz").unwrap().data_mut().fill(20.0);
        let h = [0.5, -0.2, 0.9];
        let g = f.eval(&[0.1], &h).unwrap();
        let dist: f64 = g.iter().zip(&h).map(|(a, b)| (a + b).powi(2)).sum::<f64>().sqrt();
        assert!(dist < 1e-6, "{dist}");
    }

    #[test]
    fn mlp_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = VectorField::init(FieldKind::MlpTanh, 2, 5, &mut rng);
        let g = f.eval(&[100.0, -50.0], &[30.0; 5]).unwrap();
        assert!(g.iter().all(|v| v.abs() <= 1.0));

        let mut relu = VectorField::zeros(FieldKind::MlpRelu, 1, 2);
        let w1 = relu.params_mut().get_mut("w1").unwrap();
        w1.data_mut().copy_from_slice(&[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        relu.params_mut().get_mut("w2").unwrap().data_mut().copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(relu.eval(&[0.0], &[-1.0, -2.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn budget_examples() {
        let l = lipschitz_budget(1.0, 1.0, 1.0).unwrap();
        assert!((l - 1.718_281_828_459_045).abs() < 1e-12);
        let small = lipschitz_budget(1.0, 1.0, 1e-8).unwrap();
        assert!((small - 1e-8).abs() < 1e-15);
        assert!(lipschitz_budget(-1.0, 1.0, 1.0).is_err());

        let target = lipschitz_budget(1.0, 1.0, 2.0).unwrap();
        let at_two = hidden_lipschitz_for_budget(target, 1.0, 2.0).unwrap();
        let at_four = hidden_lipschitz_for_budget(target, 1.0, 4.0).unwrap();
        assert!((at_two - 1.0).abs() < 1e-9);
        assert!(at_four < at_two);
        assert!(hidden_lipschitz_for_budget(target, 1.0, 8.0).is_err());
    }

    #[test]
    fn kind_round_trip() {
        for k in FieldKind::ALL {
            assert_eq!(k.name().parse::<FieldKind>().unwrap(), k);
        }
        assert!("gru".parse::<FieldKind>().is_err());
    }

    #[test]
    fn median_of_durations() {
        let mk = |d: f64| TimeSeries::new(vec![0.0, d], vec![vec![0.0]; 2], crate::series::Target::Class(0)).unwrap();
        let set = [mk(1.0), mk(4.0), mk(2.0), mk(10.0)];
        assert_eq!(median_timeframe(&set), Some(3.0));
    }
}
