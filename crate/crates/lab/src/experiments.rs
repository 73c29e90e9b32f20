//! Training-based studies: time scaling on Bump, memory on SineMix, NFE
//! correlation sweeps, weight norms, trajectory norms and attack robustness.

use crate::baselines::{RecurrentBaseline, RecurrentKind};
use denots_core::datagen::{attack_set, AttackKind, AttackSpec, DatagenError, DatasetSpec, Splits};
use denots_core::dynamics::FieldKind;
use denots_core::experiment::{run_on_splits, ExperimentConfig, ExperimentError, ExperimentOutcome};
use denots_core::interp::SplinePath;
use denots_core::metrics::{correlation, CorrelationKind, MetricError};
use denots_core::model::{ModelError, SequenceModel, Sncde};
use denots_core::rng::substream;
use denots_core::series::TimeSeries;
use denots_core::solver::{SolverConfig, SolverError};
use denots_core::train::{evaluate, train, TrainConfig, TrainError};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Datagen(#[from] DatagenError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("invalid study config: {0}")]
    Invalid(String),
}

/// Training diverged or the solver blew up.
pub fn is_divergence(e: &ExperimentError) -> bool {
    match e {
        ExperimentError::Train(TrainError::Divergence { .. }) => true,
        ExperimentError::Train(TrainError::Model(ModelError::Solver(s))) => {
            matches!(s, SolverError::NonFinite { .. } | SolverError::MaxSteps { .. })
        }
        _ => false,
    }
}

/// Trains one configuration; divergence yields `None`.
fn attempt(cfg: &ExperimentConfig, splits: &Splits) -> Result<Option<ExperimentOutcome>, StudyError> {
    match run_on_splits(cfg, splits, |_| {}) {
        Ok(out) => Ok(Some(out)),
        Err(e) if is_divergence(&e) => {
            log::warn!("run {} diverged: {e}", cfg.hash());
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Mean update-gate activation along the hidden trajectories of `set`.
pub fn mean_update_gate(model: &Sncde, set: &[TimeSeries], samples: usize) -> Result<Option<f64>, ModelError> {
    if !model.field.kind().is_gru() {
        return Ok(None);
    }
    let (mut total, mut count) = (0.0, 0usize);
    for series in set {
        let prepared = model.prepare(series)?;
        let path = SplinePath::fit(&prepared)?;
        let (t0, t1) = path.domain();
        let times: Vec<f64> = (1..=samples).map(|k| t0 + (t1 - t0) * k as f64 / samples as f64).collect();
        let traj = model.hidden_trajectory(series, &times)?;
        for (t, h) in times.iter().zip(&traj.samples) {
            let x = path.eval(*t)?;
            if let Some(g) = model.field.gru_gates(&x, h)? {
                total += g.update.iter().sum::<f64>();
                count += g.update.len();
            }
        }
    }
    Ok((count > 0).then(|| total / count as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpStudyConfig {
    pub base: ExperimentConfig,
    pub seeds: Vec<u64>,
    /// Candidate time scales for the scaled model, chosen on validation.
    pub scales: Vec<f64>,
    /// `rtol = atol` of the lowered-tolerance model.
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpRow {
    pub seed: u64,
    pub default_metric: f64,
    pub default_nfe: f64,
    pub tolerance_metric: f64,
    pub tolerance_nfe: f64,
    pub scale_metric: f64,
    pub scale_nfe: f64,
    pub chosen_scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpReport {
    pub rows: Vec<BumpRow>,
    pub mean_default: f64,
    pub mean_tolerance: f64,
    pub mean_scale: f64,
}

/// Default (`D = 1`), lowered tolerance and validation-selected time scale, per seed.
/// Diverged runs score NaN.
pub fn bump_scale_study(cfg: &BumpStudyConfig) -> Result<BumpReport, StudyError> {
    if cfg.scales.is_empty() || cfg.seeds.is_empty() {
        return Err(StudyError::Invalid("seeds and scales must be non-empty".into()));
    }
    let mut rows = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let mut base = cfg.base.clone();
        base.seed = seed;
        let splits = base.splits()?;
        let mut cache: HashMap<String, Option<(f64, f64, f64)>> = HashMap::new();
        let mut run = |c: &ExperimentConfig| -> Result<Option<(f64, f64, f64)>, StudyError> {
            if let Some(hit) = cache.get(&c.hash()) {
                return Ok(*hit);
            }
            let res = attempt(c, &splits)?.map(|o| (o.val_metric, o.test_metric, o.test_nfe));
            cache.insert(c.hash(), res);
            Ok(res)
        };
        let default_cfg = ExperimentConfig { scale: 1.0, ..base.clone() };
        let default = run(&default_cfg)?;
        let mut tol_cfg = default_cfg.clone();
        tol_cfg.solver.rtol = cfg.tolerance;
        tol_cfg.solver.atol = cfg.tolerance;
        let tolerance = run(&tol_cfg)?;
        let mut best: Option<(f64, f64, f64, f64)> = None;
        for &scale in &cfg.scales {
            let c = ExperimentConfig { scale, ..base.clone() };
            if let Some((val, test, nfe)) = run(&c)? {
                if best.is_none_or(|b| val > b.0) {
                    best = Some((val, test, nfe, scale));
                }
            }
        }
        let nan3 = (f64::NAN, f64::NAN, f64::NAN);
        let (_, dm, dn) = default.unwrap_or(nan3);
        let (_, tm, tn) = tolerance.unwrap_or(nan3);
        let (_, sm, sn, sd) = best.unwrap_or((f64::NAN, f64::NAN, f64::NAN, f64::NAN));
        log::info!("bump seed {seed}: default {dm:.3}, tolerance {tm:.3}, scale {sm:.3} (D = {sd})");
        rows.push(BumpRow {
            seed,
            default_metric: dm,
            default_nfe: dn,
            tolerance_metric: tm,
            tolerance_nfe: tn,
            scale_metric: sm,
            scale_nfe: sn,
            chosen_scale: sd,
        });
    }
    let col = |f: fn(&BumpRow) -> f64| mean(&rows.iter().map(f).collect::<Vec<_>>());
    Ok(BumpReport {
        mean_default: col(|r| r.default_metric),
        mean_tolerance: col(|r| r.tolerance_metric),
        mean_scale: col(|r| r.scale_metric),
        rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backbone {
    Rnn,
    Gru,
    NoNf,
    SyncNf,
    AntiNf,
    MlpTanh,
    MlpRelu,
}

impl Backbone {
    pub fn field(self) -> Option<FieldKind> {
        match self {
            Backbone::Rnn | Backbone::Gru => None,
            Backbone::NoNf => Some(FieldKind::NoNf),
            Backbone::SyncNf => Some(FieldKind::SyncNf),
            Backbone::AntiNf => Some(FieldKind::AntiNf),
            Backbone::MlpTanh => Some(FieldKind::MlpTanh),
            Backbone::MlpRelu => Some(FieldKind::MlpRelu),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryBenchConfig {
    pub dataset: DatasetSpec,
    pub hidden_dim: usize,
    /// Time scale of the neural CDE backbones.
    pub scale: f64,
    pub solver: SolverConfig,
    pub training: TrainConfig,
    /// Training of the discrete recurrent baselines; `None` reuses `training`.
    #[serde(default)]
    pub baseline_training: Option<TrainConfig>,
    pub seeds: Vec<u64>,
    pub backbones: Vec<Backbone>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryRow {
    pub backbone: Backbone,
    pub seed: u64,
    /// Test R²; `None` when training diverged.
    pub r2: Option<f64>,
    pub best_epoch: usize,
    pub epochs: usize,
    pub mean_update_gate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemorySummary {
    pub backbone: Backbone,
    /// Diverged runs count as R² = 0.
    pub mean_r2: f64,
    pub min_r2: f64,
    pub diverged: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryReport {
    pub rows: Vec<MemoryRow>,
    pub summary: Vec<MemorySummary>,
}

impl MemoryReport {
    pub fn summary_for(&self, backbone: Backbone) -> Option<&MemorySummary> {
        self.summary.iter().find(|s| s.backbone == backbone)
    }
}

pub fn sinemix_memory_bench(cfg: &MemoryBenchConfig) -> Result<MemoryReport, StudyError> {
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let mut exp = ExperimentConfig::new(cfg.dataset.clone());
        exp.seed = seed;
        let splits = exp.splits()?;
        for &backbone in &cfg.backbones {
            let row = match backbone.field() {
                Some(field) => {
                    let c = ExperimentConfig {
                        field,
                        hidden_dim: cfg.hidden_dim,
                        scale: cfg.scale,
                        solver: cfg.solver.clone(),
                        training: cfg.training.clone(),
                        ..exp.clone()
                    };
                    match attempt(&c, &splits)? {
                        Some(o) => MemoryRow {
                            backbone,
                            seed,
                            r2: Some(o.test_metric),
                            best_epoch: o.best_epoch,
                            epochs: o.history.len(),
                            mean_update_gate: mean_update_gate(&o.model, &splits.test[..splits.test.len().min(16)], 20)?,
                        },
                        None => MemoryRow { backbone, seed, r2: None, best_epoch: 0, epochs: 0, mean_update_gate: None },
                    }
                }
                None => {
                    let kind = if backbone == Backbone::Rnn { RecurrentKind::Rnn } else { RecurrentKind::Gru };
                    let task = cfg.dataset.kind.task();
                    let channels = cfg.dataset.kind.channels();
                    let mut model = RecurrentBaseline::new(kind, task, channels, cfg.hidden_dim, &mut substream(seed, "init"));
                    model.fit_preprocessing(&splits.train);
                    let training = cfg.baseline_training.as_ref().unwrap_or(&cfg.training);
                    match train(model, &splits.train, &splits.val, training, &mut substream(seed, "shuffle")) {
                        Ok(out) => MemoryRow {
                            backbone,
                            seed,
                            r2: Some(evaluate(&out.model, &splits.test)?.metric),
                            best_epoch: out.best_epoch,
                            epochs: out.history.len(),
                            mean_update_gate: None,
                        },
                        Err(TrainError::Divergence { .. }) => {
                            MemoryRow { backbone, seed, r2: None, best_epoch: 0, epochs: 0, mean_update_gate: None }
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
            };
            log::info!("sinemix {:?} seed {seed}: r2 {:?}", row.backbone, row.r2);
            rows.push(row);
        }
    }
    let summary = cfg
        .backbones
        .iter()
        .map(|&backbone| {
            let scores: Vec<f64> =
                rows.iter().filter(|r| r.backbone == backbone).map(|r| r.r2.unwrap_or(0.0)).collect();
            MemorySummary {
                backbone,
                mean_r2: mean(&scores),
                min_r2: scores.iter().copied().fold(f64::INFINITY, f64::min),
                diverged: rows.iter().filter(|r| r.backbone == backbone && r.r2.is_none()).count(),
            }
        })
        .collect();
    Ok(MemoryReport { rows, summary })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// `rtol = atol` at the base time scale.
    Tolerance,
    /// Time scale `D` at the base tolerance.
    Scale,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NfeSweepConfig {
    pub base: ExperimentConfig,
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl NfeSweepConfig {
    pub fn point_config(&self, value: f64, seed: u64) -> ExperimentConfig {
        let mut c = self.base.clone();
        c.seed = seed;
        match self.axis {
            SweepAxis::Tolerance => {
                c.solver.rtol = value;
                c.solver.atol = value;
            }
            SweepAxis::Scale => c.scale = value,
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub seed: u64,
    pub nfe: f64,
    pub metric: f64,
    pub diverged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NfeSweepReport {
    pub field: FieldKind,
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
    /// Grid values with every seed diverged.
    pub excluded: Vec<f64>,
    /// Per grid value: `(value, mean NFE, mean metric)` over non-diverged seeds.
    pub means: Vec<(f64, f64, f64)>,
    pub pearson: f64,
    pub spearman: f64,
}

/// Trains one model per grid point and seed, then correlates log mean NFE
/// with the mean test metric across grid values.
pub fn nfe_metric_sweep(cfg: &NfeSweepConfig) -> Result<NfeSweepReport, StudyError> {
    if cfg.grid.len() < 3 {
        return Err(MetricError::TooFew { needed: 3, got: cfg.grid.len() }.into());
    }
    let mut points = Vec::new();
    let mut split_cache: HashMap<u64, Splits> = HashMap::new();
    for &value in &cfg.grid {
        for &seed in &cfg.seeds {
            let c = cfg.point_config(value, seed);
            if !split_cache.contains_key(&seed) {
                split_cache.insert(seed, c.splits()?);
            }
            let point = match attempt(&c, &split_cache[&seed])? {
                Some(o) => SweepPoint { value, seed, nfe: o.test_nfe, metric: o.test_metric, diverged: false },
                None => SweepPoint { value, seed, nfe: f64::NAN, metric: f64::NAN, diverged: true },
            };
            log::info!("sweep {:?}={value} seed {seed}: nfe {:.1} metric {:.4}", cfg.axis, point.nfe, point.metric);
            points.push(point);
        }
    }
    let agg = aggregate_sweep(&cfg.grid, &points)?;
    Ok(NfeSweepReport {
        field: cfg.base.field,
        axis: cfg.axis,
        points,
        excluded: agg.excluded,
        means: agg.means,
        pearson: agg.pearson,
        spearman: agg.spearman,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepAggregate {
    /// Per grid value: `(value, mean NFE, mean metric)` over non-diverged seeds.
    pub means: Vec<(f64, f64, f64)>,
    /// Grid values with every seed diverged.
    pub excluded: Vec<f64>,
    pub pearson: f64,
    pub spearman: f64,
}

/// Averages points per grid value and correlates log mean NFE with the mean metric.
pub fn aggregate_sweep(grid: &[f64], points: &[SweepPoint]) -> Result<SweepAggregate, MetricError> {
    let mut means = Vec::new();
    let mut excluded = Vec::new();
    for &value in grid {
        let ok: Vec<&SweepPoint> = points.iter().filter(|p| p.value == value && !p.diverged).collect();
        if ok.is_empty() {
            excluded.push(value);
            continue;
        }
        let nfe = mean(&ok.iter().map(|p| p.nfe).collect::<Vec<_>>());
        let metric = mean(&ok.iter().map(|p| p.metric).collect::<Vec<_>>());
        means.push((value, nfe, metric));
    }
    let log_nfe: Vec<f64> = means.iter().map(|m| m.1.ln()).collect();
    let metric: Vec<f64> = means.iter().map(|m| m.2).collect();
    Ok(SweepAggregate {
        pearson: correlation(&log_nfe, &metric, CorrelationKind::Pearson)?,
        spearman: correlation(&log_nfe, &metric, CorrelationKind::Spearman)?,
        means,
        excluded,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightNormConfig {
    pub base: ExperimentConfig,
    pub scales: Vec<f64>,
    pub seeds: Vec<u64>,
    pub trained: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightNormRow {
    pub scale: f64,
    pub seed: u64,
    /// l₂ norm of all flat parameters; `None` when training diverged.
    pub l2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightNormReport {
    pub rows: Vec<WeightNormRow>,
    /// Per scale: mean norm over non-diverged seeds.
    pub means: Vec<(f64, f64)>,
    /// Spearman of `(D, mean norm)`; NaN with fewer than 3 scales.
    pub spearman: f64,
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn l2_norm_vs_scale(cfg: &WeightNormConfig) -> Result<WeightNormReport, StudyError> {
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let mut base = cfg.base.clone();
        base.seed = seed;
        let splits = base.splits()?;
        for &scale in &cfg.scales {
            let c = ExperimentConfig { scale, ..base.clone() };
            let norm = if cfg.trained {
                attempt(&c, &splits)?.map(|o| l2(&o.model.flat_params()))
            } else {
                Some(l2(&c.init_model(&splits.train).flat_params()))
            };
            rows.push(WeightNormRow { scale, seed, l2: norm });
        }
    }
    let means: Vec<(f64, f64)> = cfg
        .scales
        .iter()
        .filter_map(|&s| {
            let v: Vec<f64> = rows.iter().filter(|r| r.scale == s).filter_map(|r| r.l2).collect();
            (!v.is_empty()).then(|| (s, mean(&v)))
        })
        .collect();
    let xs: Vec<f64> = means.iter().map(|m| m.0).collect();
    let ys: Vec<f64> = means.iter().map(|m| m.1).collect();
    let spearman = correlation(&xs, &ys, CorrelationKind::Spearman).unwrap_or(f64::NAN);
    Ok(WeightNormReport { rows, means, spearman })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStudyConfig {
    pub dataset: DatasetSpec,
    pub kinds: Vec<FieldKind>,
    pub scales: Vec<f64>,
    pub seeds: Vec<u64>,
    pub hidden_dim: usize,
    pub solver: SolverConfig,
    /// Train each model first; otherwise use the seeded initialization.
    pub trained: bool,
    pub training: TrainConfig,
    /// Test sequences integrated per model.
    pub sequences: usize,
    /// Samples per trajectory.
    pub samples: usize,
    /// Norms above this count as divergence.
    pub divergence_threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub kind: FieldKind,
    pub scale: f64,
    pub seed: u64,
    pub trained: bool,
    /// Largest `‖h(t)‖₂` over sequences and samples.
    pub sup_norm: f64,
    /// Largest `|h_i(t)|`.
    pub max_abs_component: f64,
    pub diverged: bool,
    /// `(fraction of the sequence, mean ‖h‖₂ over sequences)`.
    pub curve: Vec<(f64, f64)>,
    pub mean_update_gate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub rows: Vec<TrajectoryRow>,
}

impl TrajectoryReport {
    pub fn rows_for(&self, kind: FieldKind, scale: f64) -> impl Iterator<Item = &TrajectoryRow> {
        self.rows.iter().filter(move |r| r.kind == kind && r.scale == scale)
    }
}

/// Hidden-state norms along test trajectories; solver failures and norms
/// beyond the threshold are recorded as divergence events.
pub fn trajectory_norm_study(cfg: &TrajectoryStudyConfig) -> Result<TrajectoryReport, StudyError> {
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let mut base = ExperimentConfig::new(cfg.dataset.clone());
        base.seed = seed;
        base.hidden_dim = cfg.hidden_dim;
        base.solver = cfg.solver.clone();
        base.training = cfg.training.clone();
        let splits = base.splits()?;
        let probe = &splits.test[..splits.test.len().min(cfg.sequences)];
        for &kind in &cfg.kinds {
            for &scale in &cfg.scales {
                let c = ExperimentConfig { field: kind, scale, ..base.clone() };
                let model = if cfg.trained {
                    attempt(&c, &splits)?.map(|o| o.model)
                } else {
                    Some(c.init_model(&splits.train))
                };
                let row = match model {
                    Some(m) => trajectory_row(&m, probe, cfg, seed),
                    None => TrajectoryRow {
                        kind,
                        scale,
                        seed,
                        trained: cfg.trained,
                        sup_norm: f64::INFINITY,
                        max_abs_component: f64::INFINITY,
                        diverged: true,
                        curve: Vec::new(),
                        mean_update_gate: None,
                    },
                };
                log::info!("trajectory {kind} D={scale} seed {seed}: sup {:.3} diverged {}", row.sup_norm, row.diverged);
                rows.push(row);
            }
        }
    }
    Ok(TrajectoryReport { rows })
}

fn trajectory_row(model: &Sncde, probe: &[TimeSeries], cfg: &TrajectoryStudyConfig, seed: u64) -> TrajectoryRow {
    let mut sup_norm: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    let mut diverged = false;
    let mut sums = vec![0.0; cfg.samples];
    let mut counted = 0usize;
    for series in probe {
        let Ok(prepared) = model.prepare(series) else {
            diverged = true;
            continue;
        };
        let times = prepared.times();
        let (t0, t1) = (times[0], *times.last().expect("non-empty"));
        let grid: Vec<f64> = (1..=cfg.samples).map(|k| t0 + (t1 - t0) * k as f64 / cfg.samples as f64).collect();
        match model.hidden_trajectory(series, &grid) {
            Ok(sol) => {
                for (k, h) in sol.samples.iter().enumerate() {
                    let n = l2(h);
                    if !n.is_finite() || n > cfg.divergence_threshold {
                        diverged = true;
                    }
                    sup_norm = sup_norm.max(n);
                    max_abs = h.iter().fold(max_abs, |m, v| m.max(v.abs()));
                    sums[k] += n;
                }
                counted += 1;
            }
            Err(_) => diverged = true,
        }
    }
    let curve = (0..cfg.samples)
        .map(|k| ((k + 1) as f64 / cfg.samples as f64, sums[k] / counted.max(1) as f64))
        .collect();
    let mean_update_gate = mean_update_gate(model, &probe[..probe.len().min(4)], 20).ok().flatten();
    TrajectoryRow {
        kind: model.field.kind(),
        scale: model.config.scale,
        seed,
        trained: cfg.trained,
        sup_norm,
        max_abs_component: max_abs,
        diverged,
        curve,
        mean_update_gate,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackPoint {
    pub fraction: f64,
    pub mean: f64,
    pub std: f64,
    pub seeds: usize,
}

/// Test metric under an attack at each fraction, over several attack seeds.
pub fn attack_curve<M: SequenceModel>(
    model: &M,
    test: &[TimeSeries],
    kind: AttackKind,
    fractions: &[f64],
    attack_seeds: &[u64],
) -> Result<Vec<AttackPoint>, StudyError> {
    fractions
        .iter()
        .map(|&fraction| {
            let scores = attack_seeds
                .iter()
                .map(|&seed| {
                    let attacked = attack_set(test, &AttackSpec { kind, fraction, seed })?;
                    Ok(evaluate(model, &attacked)?.metric)
                })
                .collect::<Result<Vec<f64>, StudyError>>()?;
            Ok(AttackPoint { fraction, mean: mean(&scores), std: std_dev(&scores), seeds: scores.len() })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackStudyConfig {
    pub base: ExperimentConfig,
    pub kinds: Vec<FieldKind>,
    pub model_seeds: Vec<u64>,
    pub attack_seeds: Vec<u64>,
    pub attack: AttackKind,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackRow {
    pub kind: FieldKind,
    pub model_seed: u64,
    pub clean: Option<f64>,
    pub attacked_mean: Option<f64>,
    pub attacked_std: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    pub kind: FieldKind,
    pub clean: f64,
    /// Mean attacked metric over model seeds; diverged models count as 0.
    pub attacked: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub rows: Vec<AttackRow>,
    pub summary: Vec<AttackSummary>,
}

impl AttackReport {
    pub fn attacked(&self, kind: FieldKind) -> Option<f64> {
        self.summary.iter().find(|s| s.kind == kind).map(|s| s.attacked)
    }
}

pub fn attack_study(cfg: &AttackStudyConfig) -> Result<AttackReport, StudyError> {
    if cfg.base.task_kind() != denots_core::model::TaskKind::Regression
        && cfg.base.task_kind() != denots_core::model::TaskKind::Binary
    {
        return Err(StudyError::Invalid("attacks need a regression or classification task".into()));
    }
    let mut rows = Vec::new();
    for &model_seed in &cfg.model_seeds {
        let mut base = cfg.base.clone();
        base.seed = model_seed;
        let splits = base.splits()?;
        for &kind in &cfg.kinds {
            let c = ExperimentConfig { field: kind, ..base.clone() };
            let row = match attempt(&c, &splits)? {
                Some(o) => {
                    let pts = attack_curve(&o.model, &splits.test, cfg.attack, &[cfg.fraction], &cfg.attack_seeds)?;
                    AttackRow {
                        kind,
                        model_seed,
                        clean: Some(o.test_metric),
                        attacked_mean: Some(pts[0].mean),
                        attacked_std: Some(pts[0].std),
                    }
                }
                None => AttackRow { kind, model_seed, clean: None, attacked_mean: None, attacked_std: None },
            };
            log::info!("attack {kind} seed {model_seed}: clean {:?} attacked {:?}", row.clean, row.attacked_mean);
            rows.push(row);
        }
    }
    let summary = cfg
        .kinds
        .iter()
        .map(|&kind| {
            let mine: Vec<&AttackRow> = rows.iter().filter(|r| r.kind == kind).collect();
            AttackSummary {
                kind,
                clean: mean(&mine.iter().map(|r| r.clean.unwrap_or(0.0)).collect::<Vec<_>>()),
                attacked: mean(&mine.iter().map(|r| r.attacked_mean.unwrap_or(0.0)).collect::<Vec<_>>()),
            }
        })
        .collect();
    Ok(AttackReport { rows, summary })
}
