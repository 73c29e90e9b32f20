//! The scaled neural CDE pipeline: standardize, rescale time, fit the spline
//! path, integrate the hidden state from zero, and read a linear head.

use crate::dynamics::{DynamicsError, FieldEvaluator, FieldKind, ScaleConfig, VectorField};
use crate::interp::{InterpError, SplinePath};
use crate::series::{Target, TimeSeries};
use crate::solver::{integrate, FnSystem, OdeSystem, SolveResult, SolverConfig, SolverError};
use crate::tensor::{ParamSet, Tape, Tensor, TensorError, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("target {target:?} does not fit a {task:?} task")]
    TargetMismatch { task: TaskKind, target: Target },
    #[error("series has {got} channels, model expects {expected}")]
    Channels { got: usize, expected: usize },
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Regression,
    Binary,
    Multiclass,
    Forecast,
}

/// Per-channel affine normalization fitted on observed training entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(channels: usize) -> Self {
        Self { mean: vec![0.0; channels], std: vec![1.0; channels] }
    }

    /// Masked moments over `train`; zero-variance channels keep std 1.
    pub fn fit<'a>(train: impl IntoIterator<Item = &'a TimeSeries>) -> Option<Self> {
        let mut sum: Vec<f64> = Vec::new();
        let mut count: Vec<usize> = Vec::new();
        let series: Vec<&TimeSeries> = train.into_iter().collect();
        let u = series.first()?.channels();
        sum.resize(u, 0.0);
        count.resize(u, 0);
        for s in &series {
            for row in s.features() {
                for (c, v) in row.iter().enumerate() {
                    if !v.is_nan() {
                        sum[c] += v;
                        count[c] += 1;
                    }
                }
            }
        }
        let mean: Vec<f64> =
            sum.iter().zip(&count).map(|(s, &n)| if n > 0 { s / n as f64 } else { 0.0 }).collect();
        let mut sq = vec![0.0; u];
        for s in &series {
            for row in s.features() {
                for (c, v) in row.iter().enumerate() {
                    if !v.is_nan() {
                        sq[c] += (v - mean[c]).powi(2);
                    }
                }
            }
        }
        let std = sq
            .iter()
            .zip(&count)
            .map(|(q, &n)| {
                let sd = if n > 0 { (q / n as f64).sqrt() } else { 0.0 };
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Some(Self { mean, std })
    }

    pub fn apply(&self, series: &TimeSeries) -> TimeSeries {
        let mut out = series.clone();
        for row in out.features_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                if !v.is_nan() {
                    *v = (*v - self.mean[c]) / self.std[c];
                }
            }
        }
        out
    }
}

/// Affine map between model outputs and real-valued targets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetScaling {
    pub mean: f64,
    pub std: f64,
}

impl Default for TargetScaling {
    fn default() -> Self {
        Self { mean: 0.0, std: 1.0 }
    }
}

impl TargetScaling {
    pub fn fit(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        Self { mean, std: if sd > 1e-12 { sd } else { 1.0 } }
    }

    pub fn encode(&self, y: f64) -> f64 {
        (y - self.mean) / self.std
    }

    pub fn decode(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// Real-valued targets of a series, flattened (regression value or all forecast values).
pub fn real_targets(target: &Target) -> Vec<f64> {
    match target {
        Target::Regression(y) => vec![*y],
        Target::Forecast { values, .. } => values.iter().flatten().copied().collect(),
        Target::Class(_) => Vec::new(),
    }
}

/// Output nodes of one recorded forward pass.
pub struct Forward {
    /// Raw head outputs (logits for classification, standardized values otherwise).
    pub outputs: Vec<Var>,
    pub nfe: usize,
}

/// Decoded predictions for one series.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    /// Probabilities for classification, target-space values otherwise.
    pub outputs: Vec<Vec<f64>>,
    pub nfe: usize,
}

/// Anything trainable by [`crate::train::train`].
pub trait SequenceModel: Clone {
    fn task(&self) -> TaskKind;
    fn target_scaling(&self) -> TargetScaling;
    fn flat_params(&self) -> Vec<f64>;
    fn set_flat_params(&mut self, flat: &[f64]) -> Result<(), TensorError>;
    fn attach(&self, tape: &mut Tape) -> Vec<Var>;
    fn forward(&self, tape: &mut Tape, params: &[Var], series: &TimeSeries) -> Result<Forward, ModelError>;

    /// Runs [`Self::forward`] on a scratch tape and decodes the outputs.
    fn predict(&self, series: &TimeSeries) -> Result<Prediction, ModelError> {
        let mut tape = Tape::new();
        let vars = self.attach(&mut tape);
        let fwd = self.forward(&mut tape, &vars, series)?;
        let raw: Vec<Vec<f64>> = fwd.outputs.iter().map(|&v| tape.value(v).data().to_vec()).collect();
        Ok(Prediction { outputs: decode_outputs(self.task(), self.target_scaling(), raw), nfe: fwd.nfe })
    }
}

/// Maps raw head outputs to probabilities or target-space values.
pub fn decode_outputs(task: TaskKind, scaling: TargetScaling, raw: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    match task {
        TaskKind::Binary => raw.into_iter().map(|o| o.into_iter().map(crate::tensor::sigmoid).collect()).collect(),
        TaskKind::Multiclass => raw
            .into_iter()
            .map(|o| {
                let m = o.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = o.iter().map(|v| (v - m).exp()).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|v| v / s).collect()
            })
            .collect(),
        TaskKind::Regression | TaskKind::Forecast => {
            raw.into_iter().map(|o| o.into_iter().map(|v| scaling.decode(v)).collect()).collect()
        }
    }
}

/// Records the task loss for one series on the tape.
pub fn loss_on_tape(
    tape: &mut Tape,
    task: TaskKind,
    scaling: TargetScaling,
    outputs: &[Var],
    target: &Target,
) -> Result<Var, ModelError> {
    let mismatch = || ModelError::TargetMismatch { task, target: target.clone() };
    match (task, target) {
        (TaskKind::Regression, Target::Regression(y)) => {
            let t = tape.leaf(Tensor::scalar(scaling.encode(*y)));
            let d = tape.sub(outputs[0], t)?;
            let sq = tape.mul(d, d)?;
            Ok(tape.mean(sq))
        }
        (TaskKind::Binary, Target::Class(c)) => {
            let y = *c as f64;
            let p = tape.sigmoid(outputs[0]);
            let p = tape.clamp(p, 1e-7, 1.0 - 1e-7);
            let lp = tape.ln(p);
            let q = tape.one_minus(p);
            let lq = tape.ln(q);
            let a = tape.scale(lp, -y);
            let b = tape.scale(lq, -(1.0 - y));
            let s = tape.add(a, b)?;
            Ok(tape.sum(s))
        }
        (TaskKind::Multiclass, Target::Class(c)) => {
            let ls = tape.log_softmax(outputs[0]);
            let k = tape.value(ls).len();
            if *c >= k {
                return Err(mismatch());
            }
            let mut onehot = vec![0.0; k];
            onehot[*c] = -1.0;
            let w = tape.constant_vec(onehot);
            let picked = tape.mul(ls, w)?;
            Ok(tape.sum(picked))
        }
        (TaskKind::Forecast, Target::Forecast { values, .. }) => {
            if values.len() != outputs.len() {
                return Err(mismatch());
            }
            let mut terms = Vec::with_capacity(outputs.len());
            let mut count = 0usize;
            for (o, row) in outputs.iter().zip(values) {
                let t = tape.constant_vec(row.iter().map(|&y| scaling.encode(y)).collect());
                let d = tape.sub(*o, t)?;
                let sq = tape.mul(d, d)?;
                terms.push((tape.sum(sq), 1.0));
                count += row.len();
            }
            let total = tape.lincomb(&terms)?;
            Ok(tape.scale(total, 1.0 / count as f64))
        }
        _ => Err(mismatch()),
    }
}

/// Non-tape loss on decoded predictions, matching [`loss_on_tape`].
pub fn loss_value(task: TaskKind, scaling: TargetScaling, pred: &Prediction, target: &Target) -> f64 {
    match (task, target) {
        (TaskKind::Regression, Target::Regression(y)) => {
            (scaling.encode(pred.outputs[0][0]) - scaling.encode(*y)).powi(2)
        }
        (TaskKind::Binary, Target::Class(c)) => {
            let p = pred.outputs[0][0].clamp(1e-7, 1.0 - 1e-7);
            if *c == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        }
        (TaskKind::Multiclass, Target::Class(c)) => -pred.outputs[0][*c].max(1e-300).ln(),
        (TaskKind::Forecast, Target::Forecast { values, .. }) => {
            let mut s = 0.0;
            let mut n = 0usize;
            for (o, row) in pred.outputs.iter().zip(values) {
                for (a, b) in o.iter().zip(row) {
                    s += (scaling.encode(*a) - scaling.encode(*b)).powi(2);
                    n += 1;
                }
            }
            s / n.max(1) as f64
        }
        _ => f64::NAN,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SncdeConfig {
    pub field: FieldKind,
    pub hidden_dim: usize,
    pub task: TaskKind,
    pub output_dim: usize,
    pub scale: f64,
    pub gap_channel: bool,
    pub solver: SolverConfig,
}

impl Default for SncdeConfig {
    fn default() -> Self {
        Self {
            field: FieldKind::AntiNf,
            hidden_dim: 32,
            task: TaskKind::Regression,
            output_dim: 1,
            scale: 1.0,
            gap_channel: false,
            solver: SolverConfig::default(),
        }
    }
}

/// Scaled neural CDE with a linear head.
#[derive(Clone, Debug, PartialEq)]
pub struct Sncde {
    pub config: SncdeConfig,
    pub field: VectorField,
    pub head: ParamSet,
    pub input_norm: Standardizer,
    pub target_scaling: TargetScaling,
    /// Median training duration; timestamps are multiplied by `scale / normalizer`.
    pub normalizer: f64,
}

struct TapeOde<'a> {
    tape: &'a mut Tape,
    field: &'a VectorField,
    vars: &'a [Var],
    path: &'a SplinePath,
    x: Vec<f64>,
}

impl OdeSystem for TapeOde<'_> {
    type State = Var;

    fn eval(&mut self, t: f64, h: &Var) -> Result<Var, SolverError> {
        let err = |e: &dyn std::fmt::Display| SolverError::Field { t, message: e.to_string() };
        self.path.eval_into(t, &mut self.x).map_err(|e| err(&e))?;
        let x = self.tape.constant_vec(self.x.clone());
        self.field.forward(self.tape, self.vars, x, *h).map_err(|e| err(&e))
    }

    fn combine(&mut self, y: &Var, terms: &[(&Var, f64)]) -> Result<Var, SolverError> {
        let mut all = Vec::with_capacity(terms.len() + 1);
        all.push((*y, 1.0));
        all.extend(terms.iter().map(|(k, c)| (**k, *c)));
        self.tape.lincomb(&all).map_err(|e| SolverError::Field { t: f64::NAN, message: e.to_string() })
    }

    fn values<'s>(&'s self, y: &'s Var) -> &'s [f64] {
        self.tape.value(*y).data()
    }

    fn checkpoint(&self) -> usize {
        self.tape.len()
    }

    fn rollback(&mut self, mark: usize) {
        self.tape.truncate(mark);
    }
}

impl Sncde {
    pub fn new<R: Rng + ?Sized>(config: SncdeConfig, input_channels: usize, rng: &mut R) -> Self {
        let u = input_channels + usize::from(config.gap_channel);
        let v = config.hidden_dim;
        let field = VectorField::init(config.field, u, v, rng);
        let bound = 1.0 / (v as f64).sqrt();
        let o = config.output_dim;
        let w = (0..o * v).map(|_| rng.random_range(-bound..=bound)).collect();
        let b = (0..o).map(|_| rng.random_range(-bound..=bound)).collect();
        let mut head = ParamSet::new();
        head.insert("head_w", Tensor::matrix(o, v, w).expect("head shape"));
        head.insert("head_b", Tensor::vector(b));
        Self {
            config,
            field,
            head,
            input_norm: Standardizer::identity(u),
            target_scaling: TargetScaling::default(),
            normalizer: 1.0,
        }
    }

    /// Fits input standardization, target scaling and the time normalizer on `train`.
    pub fn fit_preprocessing(&mut self, train: &[TimeSeries]) {
        let with_gap: Vec<TimeSeries>;
        let base: &[TimeSeries] = if self.config.gap_channel {
            with_gap = train.iter().map(TimeSeries::with_gap_channel).collect();
            &with_gap
        } else {
            train
        };
        if let Some(s) = Standardizer::fit(base) {
            self.input_norm = s;
        }
        if matches!(self.config.task, TaskKind::Regression | TaskKind::Forecast) {
            let ys: Vec<f64> = train.iter().flat_map(|s| real_targets(&s.target)).collect();
            self.target_scaling = TargetScaling::fit(&ys);
        }
        if let Some(m) = crate::dynamics::median_timeframe(train) {
            if m > 0.0 {
                self.normalizer = m;
            }
        }
    }

    pub fn time_factor(&self) -> f64 {
        self.config.scale / self.normalizer
    }

    pub fn set_scale(&mut self, scale: f64) {
        self.config.scale = scale;
    }

    pub fn scale_config(&self) -> Result<ScaleConfig, DynamicsError> {
        ScaleConfig::new(self.config.scale, self.normalizer)
    }

    /// Gap channel, standardization and time scaling.
    pub fn prepare(&self, series: &TimeSeries) -> Result<TimeSeries, ModelError> {
        let base = if self.config.gap_channel { series.with_gap_channel() } else { series.clone() };
        if base.channels() != self.field.input_dim() {
            return Err(ModelError::Channels { got: base.channels(), expected: self.field.input_dim() });
        }
        let normed = self.input_norm.apply(&base);
        Ok(normed.scaled(self.time_factor()))
    }

    /// Times at which the head is read, on the scaled axis.
    fn output_times(&self, prepared: &TimeSeries) -> Vec<f64> {
        match (&self.config.task, &prepared.target) {
            (TaskKind::Forecast, Target::Forecast { times, .. }) => times.clone(),
            _ => vec![*prepared.times().last().expect("non-empty")],
        }
    }

    /// Plain (non-tape) solve of the hidden state, sampled at `times` on the
    /// scaled axis; the final requested time ends the integration.
    pub fn hidden_trajectory(&self, series: &TimeSeries, times: &[f64]) -> Result<SolveResult<Vec<f64>>, ModelError> {
        let prepared = self.prepare(series)?;
        let path = SplinePath::fit(&prepared)?;
        self.solve_plain(&path, prepared.times()[0], times)
    }

    fn solve_plain(&self, path: &SplinePath, t0: f64, times: &[f64]) -> Result<SolveResult<Vec<f64>>, ModelError> {
        let mut ev: FieldEvaluator<'_> = self.field.evaluator();
        let mut x = vec![0.0; path.dim()];
        let mut sys = FnSystem::new(|t: f64, h: &[f64], dh: &mut [f64]| {
            let err = |e: &dyn std::fmt::Display| SolverError::Field { t, message: e.to_string() };
            path.eval_into(t, &mut x).map_err(|e| err(&e))?;
            ev.eval(&x, h, dh).map_err(|e| err(&e))
        });
        let h0 = vec![0.0; self.field.hidden_dim()];
        Ok(integrate(&mut sys, h0, t0, times, &self.config.solver)?)
    }

    fn head_value(&self, h: &[f64]) -> Vec<f64> {
        let w = self.head.get("head_w").expect("head_w");
        let b = self.head.get("head_b").expect("head_b");
        let v = h.len();
        (0..b.len())
            .map(|i| b.data()[i] + w.data()[i * v..(i + 1) * v].iter().zip(h).map(|(a, c)| a * c).sum::<f64>())
            .collect()
    }

    pub fn field_param_count(&self) -> usize {
        self.field.params().numel()
    }
}

impl SequenceModel for Sncde {
    fn task(&self) -> TaskKind {
        self.config.task
    }

    fn target_scaling(&self) -> TargetScaling {
        self.target_scaling
    }

    fn flat_params(&self) -> Vec<f64> {
        let mut flat = self.field.params().flatten();
        flat.extend(self.head.flatten());
        flat
    }

    fn set_flat_params(&mut self, flat: &[f64]) -> Result<(), TensorError> {
        let n = self.field.params().numel();
        if flat.len() != n + self.head.numel() {
            return Err(TensorError::FlatLength { got: flat.len(), expected: n + self.head.numel() });
        }
        self.field.params_mut().unflatten(&flat[..n])?;
        self.head.unflatten(&flat[n..])
    }

    fn attach(&self, tape: &mut Tape) -> Vec<Var> {
        let mut vars = self.field.attach(tape);
        vars.extend(self.head.attach(tape));
        vars
    }

    fn forward(&self, tape: &mut Tape, params: &[Var], series: &TimeSeries) -> Result<Forward, ModelError> {
        let prepared = self.prepare(series)?;
        let path = SplinePath::fit(&prepared)?;
        let times = self.output_times(&prepared);
        let n_field = self.field.params().len();
        let (field_vars, head_vars) = params.split_at(n_field);
        let h0 = tape.constant_vec(vec![0.0; self.field.hidden_dim()]);
        let mut sys = TapeOde { tape, field: &self.field, vars: field_vars, path: &path, x: vec![0.0; path.dim()] };
        let result = integrate(&mut sys, h0, prepared.times()[0], &times, &self.config.solver)?;
        let mut outputs = Vec::with_capacity(result.samples.len());
        for h in &result.samples {
            outputs.push(tape.affine(head_vars[0], *h, head_vars[1])?);
        }
        Ok(Forward { outputs, nfe: result.nfe })
    }

    /// Plain solve without recording a tape.
    fn predict(&self, series: &TimeSeries) -> Result<Prediction, ModelError> {
        let prepared = self.prepare(series)?;
        let path = SplinePath::fit(&prepared)?;
        let times = self.output_times(&prepared);
        let result = self.solve_plain(&path, prepared.times()[0], &times)?;
        let raw = result.samples.iter().map(|h| self.head_value(h)).collect();
        Ok(Prediction { outputs: decode_outputs(self.config.task, self.target_scaling, raw), nfe: result.nfe })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy(target: Target) -> TimeSeries {
        let times: Vec<f64> = (0..5).map(|k| k as f64 * 0.25).collect();
        let feats = times.iter().map(|t| vec![(3.0 * t).sin()]).collect();
        TimeSeries::new(times, feats, target).unwrap()
    }

    fn zero_model(task: TaskKind, out: usize) -> Sncde {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = SncdeConfig { hidden_dim: 3, task, output_dim: out, ..SncdeConfig::default() };
        let mut m = Sncde::new(cfg, 1, &mut rng);
        let zeros = vec![0.0; m.field_param_count()];
        m.field.params_mut().unflatten(&zeros).unwrap();
        m.head.get_mut("head_b").unwrap().data_mut().fill(0.25);
        m
    }

    #[test]
    fn zero_field_predicts_head_bias() {
        let m = zero_model(TaskKind::Regression, 1);
        let p = m.predict(&toy(Target::Regression(0.0))).unwrap();
        assert_eq!(p.outputs, vec![vec![0.25]]);
    }

    #[test]
    fn binary_output_is_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = SncdeConfig { hidden_dim: 4, task: TaskKind::Binary, ..SncdeConfig::default() };
        let m = Sncde::new(cfg, 1, &mut rng);
        let p = m.predict(&toy(Target::Class(1))).unwrap().outputs[0][0];
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn forecast_reads_every_query_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = SncdeConfig { hidden_dim: 4, task: TaskKind::Forecast, ..SncdeConfig::default() };
        let m = Sncde::new(cfg, 1, &mut rng);
        let target = Target::Forecast { times: vec![0.3, 0.6, 1.0], values: vec![vec![0.0]; 3] };
        let p = m.predict(&toy(target)).unwrap();
        assert_eq!(p.outputs.len(), 3);
    }

    #[test]
    fn tape_and_plain_paths_agree_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for kind in FieldKind::ALL {
            let cfg = SncdeConfig { field: kind, hidden_dim: 4, scale: 3.0, ..SncdeConfig::default() };
            let m = Sncde::new(cfg, 1, &mut rng);
            let s = toy(Target::Regression(0.5));
            let mut tape = Tape::new();
            let vars = m.attach(&mut tape);
            let fwd = m.forward(&mut tape, &vars, &s).unwrap();
            let plain = m.predict(&s).unwrap();
            assert_eq!(tape.value(fwd.outputs[0]).data(), plain.outputs[0].as_slice(), "{kind}");
            assert_eq!(fwd.nfe, plain.nfe);
        }
    }

    #[test]
    fn loss_examples() {
        let mut tape = Tape::new();
        let zero = tape.constant_vec(vec![0.0]);
        let l = loss_on_tape(&mut tape, TaskKind::Binary, TargetScaling::default(), &[zero], &Target::Class(1)).unwrap();
        assert!((tape.value(l).item() - 2f64.ln()).abs() < 1e-12);

        let logits = tape.constant_vec(vec![0.3; 4]);
        let l = loss_on_tape(&mut tape, TaskKind::Multiclass, TargetScaling::default(), &[logits], &Target::Class(2))
            .unwrap();
        assert!((tape.value(l).item() - 4f64.ln()).abs() < 1e-12);

        let y = tape.constant_vec(vec![1.5]);
        let l = loss_on_tape(&mut tape, TaskKind::Regression, TargetScaling::default(), &[y], &Target::Regression(1.5))
            .unwrap();
        assert_eq!(tape.value(l).item(), 0.0);

        assert!(loss_on_tape(&mut tape, TaskKind::Regression, TargetScaling::default(), &[y], &Target::Class(0)).is_err());
    }

    #[test]
    fn standardizer_ignores_missing() {
        let nan = f64::NAN;
        let s = TimeSeries::new(
            vec![0.0, 1.0, 2.0],
            vec![vec![1.0, 4.0], vec![nan, 4.0], vec![3.0, 4.0]],
            Target::Regression(0.0),
        )
        .unwrap();
        let st = Standardizer::fit([&s]).unwrap();
        assert_eq!(st.mean, vec![2.0, 4.0]);
        assert_eq!(st.std, vec![1.0, 1.0]);
        let out = st.apply(&s);
        assert!(out.features()[1][0].is_nan());
        assert_eq!(out.features()[0], vec![-1.0, 0.0]);
        assert_eq!(out.features()[2], vec![1.0, 0.0]);
    }
}
