//! One reproducible experiment: dataset, model, solver and training settings
//! driven by a single root seed.

use crate::datagen::{build, DatagenError, DatasetSpec, Splits};
use crate::dynamics::FieldKind;
use crate::io::sha256_hex;
use crate::model::{Sncde, SncdeConfig, TaskKind};
use crate::rng::substream;
use crate::solver::SolverConfig;
use crate::train::{evaluate, train_with_callback, EpochRecord, TrainConfig, TrainError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: `{field}` {message}")]
    Invalid { field: &'static str, message: String },
    #[error(transparent)]
    Datagen(#[from] DatagenError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    #[serde(default = "default_field")]
    pub field: FieldKind,
    #[serde(default = "default_hidden")]
    pub hidden_dim: usize,
    /// Time scale `D`.
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default)]
    pub gap_channel: bool,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub training: TrainConfig,
    /// Must match the dataset's task when given.
    #[serde(default)]
    pub task: Option<TaskKind>,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

fn default_field() -> FieldKind {
    FieldKind::AntiNf
}
fn default_hidden() -> usize {
    32
}
fn default_scale() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSpec) -> Self {
        Self {
            dataset,
            field: default_field(),
            hidden_dim: default_hidden(),
            scale: default_scale(),
            gap_channel: false,
            solver: SolverConfig::default(),
            training: TrainConfig::default(),
            task: None,
            out: None,
            seed: 0,
        }
    }

    pub fn task_kind(&self) -> TaskKind {
        self.task.unwrap_or(self.dataset.kind.task())
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.dataset.validate()?;
        let bad = |field, message: &str| Err(ExperimentError::Invalid { field, message: message.to_string() });
        if self.hidden_dim == 0 {
            return bad("hidden_dim", "must be positive");
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return bad("scale", "must be positive");
        }
        if let Err(e) = self.solver.validate() {
            return Err(ExperimentError::Invalid { field: "solver", message: e.to_string() });
        }
        if !(self.training.lr > 0.0) {
            return bad("training.lr", "must be positive");
        }
        if self.training.patience == 0 {
            return bad("training.patience", "must be at least 1");
        }
        if let Some(t) = self.task {
            if t != self.dataset.kind.task() {
                return bad("task", &format!("{t:?} does not match dataset task {:?}", self.dataset.kind.task()));
            }
        }
        Ok(())
    }

    /// Hash of everything that influences results (the output directory excluded).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        sha256_hex(json.as_bytes())[..16].to_string()
    }

    pub fn model_config(&self) -> SncdeConfig {
        let task = self.task_kind();
        let output_dim = match task {
            TaskKind::Forecast => self.dataset.kind.channels(),
            _ => 1,
        };
        SncdeConfig {
            field: self.field,
            hidden_dim: self.hidden_dim,
            task,
            output_dim,
            scale: self.scale,
            gap_channel: self.gap_channel,
            solver: self.solver.clone(),
        }
    }

    pub fn splits(&self) -> Result<Splits, ExperimentError> {
        Ok(build(&self.dataset, self.seed)?)
    }

    /// Fresh model with preprocessing fitted on `train`.
    pub fn init_model(&self, train: &[crate::series::TimeSeries]) -> Sncde {
        let mut model = Sncde::new(self.model_config(), self.dataset.kind.channels(), &mut substream(self.seed, "init"));
        model.fit_preprocessing(train);
        model
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub model: Sncde,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub val_metric: f64,
    pub test_metric: f64,
    pub test_loss: f64,
    /// Mean solver evaluations per test sequence.
    pub test_nfe: f64,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, ExperimentError> {
    let splits = cfg.splits()?;
    run_on_splits(cfg, &splits, |_| {})
}

pub fn run_on_splits(
    cfg: &ExperimentConfig,
    splits: &Splits,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<ExperimentOutcome, ExperimentError> {
    cfg.validate()?;
    let model = cfg.init_model(&splits.train);
    let mut shuffle = substream(cfg.seed, "shuffle");
    let out = train_with_callback(model, &splits.train, &splits.val, &cfg.training, &mut shuffle, on_epoch)?;
    let test = evaluate(&out.model, &splits.test)?;
    Ok(ExperimentOutcome {
        model: out.model,
        history: out.history,
        best_epoch: out.best_epoch,
        val_metric: out.best_metric,
        test_metric: test.metric,
        test_loss: test.loss,
        test_nfe: test.nfe_mean,
    })
}
