//! Mini-batch training with Adam and early stopping on a validation metric.

use crate::metrics::{accuracy, auroc, r2, MetricError};
use crate::model::{loss_on_tape, loss_value, ModelError, Prediction, SequenceModel, TaskKind};
use crate::series::{Target, TimeSeries};
use crate::solver::SolverError;
use crate::tensor::Tape;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("training diverged at epoch {epoch}: {reason}")]
    Divergence { epoch: usize, reason: String, history: Vec<EpochRecord> },
    #[error("training set is empty")]
    EmptyTrainSet,
}

/// Bias-corrected Adam.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n], v: vec![0.0; n], step: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "Adam state length");
        assert_eq!(grads.len(), self.m.len(), "gradient length");
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// `None` means 64, or full batch below 256 sequences.
    pub batch_size: Option<usize>,
    pub patience: usize,
    /// `None` trains until early stopping triggers.
    pub max_epochs: Option<usize>,
    pub lr: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { batch_size: None, patience: 10, max_epochs: None, lr: 1e-3 }
    }
}

impl TrainConfig {
    pub fn effective_batch(&self, n_train: usize) -> usize {
        match self.batch_size {
            Some(b) => b.max(1),
            None if n_train < 256 => n_train.max(1),
            None => 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_metric: f64,
    pub nfe_mean: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub metric: f64,
    pub loss: f64,
    pub nfe_mean: f64,
    pub predictions: Vec<Prediction>,
}

/// Task metric: R² for regression and forecasting, AUROC for binary,
/// accuracy for multiclass.
pub fn task_metric(task: TaskKind, preds: &[Prediction], targets: &[&Target]) -> Result<f64, MetricError> {
    match task {
        TaskKind::Regression | TaskKind::Forecast => {
            let mut p = Vec::new();
            let mut y = Vec::new();
            for (pred, t) in preds.iter().zip(targets) {
                p.extend(pred.outputs.iter().flatten());
                y.extend(crate::model::real_targets(t));
            }
            r2(&p, &y)
        }
        TaskKind::Binary => {
            let scores: Vec<f64> = preds.iter().map(|p| p.outputs[0][0]).collect();
            let labels: Vec<bool> = targets.iter().map(|t| matches!(t, Target::Class(1))).collect();
            auroc(&scores, &labels)
        }
        TaskKind::Multiclass => {
            let probs: Vec<Vec<f64>> = preds.iter().map(|p| p.outputs[0].clone()).collect();
            let labels: Vec<usize> =
                targets.iter().map(|t| if let Target::Class(c) = t { *c } else { usize::MAX }).collect();
            accuracy(&probs, &labels)
        }
    }
}

pub fn evaluate<M: SequenceModel>(model: &M, set: &[TimeSeries]) -> Result<Evaluation, TrainError> {
    let mut predictions = Vec::with_capacity(set.len());
    let mut loss = 0.0;
    let mut nfe = 0usize;
    for s in set {
        let p = model.predict(s)?;
        loss += loss_value(model.task(), model.target_scaling(), &p, &s.target);
        nfe += p.nfe;
        predictions.push(p);
    }
    let targets: Vec<&Target> = set.iter().map(|s| &s.target).collect();
    let metric = task_metric(model.task(), &predictions, &targets)?;
    let n = set.len().max(1) as f64;
    Ok(Evaluation { metric, loss: loss / n, nfe_mean: nfe as f64 / n, predictions })
}

/// Mean loss and its flat gradient over `batch`, summed in batch order.
pub fn batch_gradient<M: SequenceModel>(model: &M, batch: &[&TimeSeries]) -> Result<(f64, Vec<f64>, usize), ModelError> {
    let n_params = model.flat_params().len();
    let mut grad = vec![0.0; n_params];
    let mut total = 0.0;
    let mut nfe = 0;
    let scale = 1.0 / batch.len() as f64;
    let mut tape = Tape::new();
    for s in batch {
        tape.clear();
        let vars = model.attach(&mut tape);
        let fwd = model.forward(&mut tape, &vars, s)?;
        nfe += fwd.nfe;
        let loss = loss_on_tape(&mut tape, model.task(), model.target_scaling(), &fwd.outputs, &s.target)?;
        total += tape.value(loss).item();
        let g = tape.backward(loss)?;
        g.accumulate_flat(&tape, &vars, scale, &mut grad);
    }
    Ok((total * scale, grad, nfe))
}

fn is_divergence(e: &ModelError) -> bool {
    matches!(e, ModelError::Solver(SolverError::NonFinite { .. } | SolverError::MaxSteps { .. }))
}

pub struct TrainOutcome<M> {
    /// Parameters from the epoch with the best validation metric.
    pub model: M,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_metric: f64,
}

/// Trains until the validation metric fails to improve for `patience`
/// consecutive epochs (or `max_epochs` is reached), then restores the best weights.
pub fn train<M: SequenceModel, R: Rng + ?Sized>(
    model: M,
    train_set: &[TimeSeries],
    val_set: &[TimeSeries],
    cfg: &TrainConfig,
    shuffle_rng: &mut R,
) -> Result<TrainOutcome<M>, TrainError> {
    train_with_callback(model, train_set, val_set, cfg, shuffle_rng, |_| {})
}

pub fn train_with_callback<M: SequenceModel, R: Rng + ?Sized>(
    mut model: M,
    train_set: &[TimeSeries],
    val_set: &[TimeSeries],
    cfg: &TrainConfig,
    shuffle_rng: &mut R,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome<M>, TrainError> {
    if train_set.is_empty() {
        return Err(TrainError::EmptyTrainSet);
    }
    let batch = cfg.effective_batch(train_set.len());
    let mut params = model.flat_params();
    let mut adam = Adam::new(params.len(), cfg.lr);
    let mut history = Vec::new();
    let mut best = (f64::NEG_INFINITY, params.clone(), 0usize);
    let mut stale = 0usize;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let patience = cfg.patience.max(1);

    let mut epoch = 0;
    loop {
        epoch += 1;
        order.shuffle(shuffle_rng);
        let mut loss_sum = 0.0;
        let mut nfe_sum = 0usize;
        for chunk in order.chunks(batch) {
            let items: Vec<&TimeSeries> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (loss, grad, nfe) = match batch_gradient(&model, &items) {
                Ok(r) => r,
                Err(e) if is_divergence(&e) => {
                    return Err(TrainError::Divergence { epoch, reason: e.to_string(), history })
                }
                Err(e) => return Err(e.into()),
            };
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(TrainError::Divergence { epoch, reason: "non-finite loss".into(), history });
            }
            loss_sum += loss * chunk.len() as f64;
            nfe_sum += nfe;
            adam.step(&mut params, &grad);
            model.set_flat_params(&params).map_err(ModelError::from)?;
        }
        let val_metric = match evaluate(&model, val_set) {
            Ok(ev) => ev.metric,
            Err(TrainError::Model(e)) if is_divergence(&e) => {
                return Err(TrainError::Divergence { epoch, reason: e.to_string(), history })
            }
            Err(e) => return Err(e),
        };
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            val_metric,
            nfe_mean: nfe_sum as f64 / train_set.len() as f64,
        };
        log::info!(
            "epoch {} loss {:.5} val {:.4} nfe {:.1}",
            record.epoch,
            record.train_loss,
            record.val_metric,
            record.nfe_mean
        );
        on_epoch(&record);
        history.push(record);
        if val_metric > best.0 {
            best = (val_metric, params.clone(), epoch);
            stale = 0;
        } else {
            stale += 1;
        }
        if stale >= patience || cfg.max_epochs.is_some_and(|m| epoch >= m) {
            break;
        }
    }
    model.set_flat_params(&best.1).map_err(ModelError::from)?;
    Ok(TrainOutcome { model, history, best_epoch: best.2, best_metric: best.0 })
}
