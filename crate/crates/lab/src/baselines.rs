//! Discrete recurrent baselines stepping once per observation.

use denots_core::dynamics::{FieldKind, VectorField};
use denots_core::model::{real_targets, Forward, ModelError, SequenceModel, Standardizer, TargetScaling, TaskKind};
use denots_core::series::TimeSeries;
use denots_core::tensor::{ParamSet, Tape, Tensor, TensorError, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecurrentKind {
    /// `h ← tanh(W [x; h] + b)`.
    Rnn,
    /// `h ← (1 − z)·n + z·h`.
    Gru,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentBaseline {
    pub kind: RecurrentKind,
    pub task: TaskKind,
    hidden_dim: usize,
    input_dim: usize,
    cell: ParamSet,
    head: ParamSet,
    input_norm: Standardizer,
    target_scaling: TargetScaling,
}

fn uniform<R: Rng + ?Sized>(n: usize, bound: f64, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
}

impl RecurrentBaseline {
    pub fn new<R: Rng + ?Sized>(kind: RecurrentKind, task: TaskKind, input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let (u, v) = (input_dim, hidden_dim);
        let bound = 1.0 / (v as f64).sqrt();
        let cell = match kind {
            RecurrentKind::Gru => VectorField::init(FieldKind::NoNf, u, v, rng).params().clone(),
            RecurrentKind::Rnn => {
                let mut p = ParamSet::new();
                p.insert("w", Tensor::matrix(v, u + v, uniform(v * (u + v), bound, rng)).expect("cell shape"));
                p.insert("b", Tensor::vector(uniform(v, bound, rng)));
                p
            }
        };
        let mut head = ParamSet::new();
        head.insert("head_w", Tensor::matrix(1, v, uniform(v, bound, rng)).expect("head shape"));
        head.insert("head_b", Tensor::vector(uniform(1, bound, rng)));
        Self {
            kind,
            task,
            hidden_dim,
            input_dim,
            cell,
            head,
            input_norm: Standardizer::identity(u),
            target_scaling: TargetScaling::default(),
        }
    }

    pub fn fit_preprocessing(&mut self, train: &[TimeSeries]) {
        if let Some(s) = Standardizer::fit(train) {
            self.input_norm = s;
        }
        if self.task == TaskKind::Regression {
            let ys: Vec<f64> = train.iter().flat_map(|s| real_targets(&s.target)).collect();
            self.target_scaling = TargetScaling::fit(&ys);
        }
    }

    fn step(&self, gru: &Option<VectorField>, tape: &mut Tape, p: &[Var], x: Var, h: Var) -> Result<Var, TensorError> {
        match gru {
            Some(field) => field.forward(tape, p, x, h),
            None => {
                let xh = tape.concat(x, h)?;
                let pre = tape.affine(p[0], xh, p[1])?;
                Ok(tape.tanh(pre))
            }
        }
    }
}

impl SequenceModel for RecurrentBaseline {
    fn task(&self) -> TaskKind {
        self.task
    }

    fn target_scaling(&self) -> TargetScaling {
        self.target_scaling
    }

    fn flat_params(&self) -> Vec<f64> {
        let mut flat = self.cell.flatten();
        flat.extend(self.head.flatten());
        flat
    }

    fn set_flat_params(&mut self, flat: &[f64]) -> Result<(), TensorError> {
        let n = self.cell.numel();
        if flat.len() != n + self.head.numel() {
            return Err(TensorError::FlatLength { got: flat.len(), expected: n + self.head.numel() });
        }
        self.cell.unflatten(&flat[..n])?;
        self.head.unflatten(&flat[n..])
    }

    fn attach(&self, tape: &mut Tape) -> Vec<Var> {
        let mut vars = self.cell.attach(tape);
        vars.extend(self.head.attach(tape));
        vars
    }

    /// Missing values enter as zero after standardization.
    fn forward(&self, tape: &mut Tape, params: &[Var], series: &TimeSeries) -> Result<Forward, ModelError> {
        if matches!(self.task, TaskKind::Forecast) {
            return Err(ModelError::Unsupported("forecasting with a recurrent baseline"));
        }
        if series.channels() != self.input_dim {
            return Err(ModelError::Channels { got: series.channels(), expected: self.input_dim });
        }
        let normed = self.input_norm.apply(series);
        let (cell, head) = params.split_at(self.cell.len());
        let gru = (self.kind == RecurrentKind::Gru).then(|| VectorField::zeros(FieldKind::NoNf, self.input_dim, self.hidden_dim));
        let mut h = tape.constant_vec(vec![0.0; self.hidden_dim]);
        for row in normed.features() {
            let x = tape.constant_vec(row.iter().map(|v| if v.is_nan() { 0.0 } else { *v }).collect());
            h = self.step(&gru, tape, cell, x, h)?;
        }
        let out = tape.affine(head[0], h, head[1])?;
        Ok(Forward { outputs: vec![out], nfe: normed.len() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use denots_core::series::Target;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy() -> TimeSeries {
        let times: Vec<f64> = (0..6).map(|k| k as f64 * 0.2).collect();
        let feats = times.iter().map(|t| vec![t.sin()]).collect();
        TimeSeries::new(times, feats, Target::Regression(0.5)).unwrap()
    }

    #[test]
    fn gru_step_matches_field_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = RecurrentBaseline::new(RecurrentKind::Gru, TaskKind::Regression, 1, 3, &mut rng);
        let field = VectorField::from_params(FieldKind::NoNf, 1, 3, m.cell.clone()).unwrap();
        let mut h = vec![0.0; 3];
        for row in toy().features() {
            h = field.eval(row, &h).unwrap();
        }
        let w = m.head.get("head_w").unwrap().data().to_vec();
        let b = m.head.get("head_b").unwrap().data()[0];
        let expected = b + w.iter().zip(&h).map(|(a, c)| a * c).sum::<f64>();
        let p = m.predict(&toy()).unwrap();
        assert!((p.outputs[0][0] - expected).abs() < 1e-12);
        assert_eq!(p.nfe, 6);
    }

    #[test]
    fn flat_params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut m = RecurrentBaseline::new(RecurrentKind::Rnn, TaskKind::Regression, 2, 4, &mut rng);
        let flat: Vec<f64> = (0..m.flat_params().len()).map(|i| i as f64 * 0.01).collect();
        m.set_flat_params(&flat).unwrap();
        assert_eq!(m.flat_params(), flat);
        assert!(m.set_flat_params(&flat[1..]).is_err());
    }

    #[test]
    fn forecast_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = RecurrentBaseline::new(RecurrentKind::Rnn, TaskKind::Forecast, 1, 2, &mut rng);
        assert!(m.predict(&toy()).is_err());
    }
}
