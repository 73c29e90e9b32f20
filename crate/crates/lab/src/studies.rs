//! Named verification studies with default configurations, pass predicates
//! and file output.

use crate::experiments::{
    attack_study, bump_scale_study, l2_norm_vs_scale, nfe_metric_sweep, sinemix_memory_bench, trajectory_norm_study,
    AttackReport, AttackStudyConfig, Backbone, BumpReport, BumpStudyConfig, MemoryBenchConfig, MemoryReport,
    NfeSweepConfig, NfeSweepReport, StudyError, SweepAxis, TrajectoryReport, TrajectoryStudyConfig, WeightNormConfig,
    WeightNormReport,
};
use crate::gp::{assumption_test_mc, AssumptionReport};
use crate::output::{emit, OutputError, StudyFiles, Tabular};
use crate::theory::{
    forgetting_sweep, iss_sweep, robustness_study, spline_error_study, ForgettingSweepConfig, ForgettingSweepReport,
    IssSweepConfig, IssSweepReport, RobustnessStudyConfig, RobustnessStudyReport, SplineStudyConfig,
    SplineStudyReport,
};
use denots_core::datagen::{AttackKind, DatasetKind, DatasetSpec};
use denots_core::dynamics::FieldKind;
use denots_core::experiment::ExperimentConfig;
use denots_core::interp::InterpError;
use denots_core::rng::substream;
use denots_core::solver::{SolverConfig, SolverError};
use denots_core::train::TrainConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("unknown study `{0}`; available: {list}", list = StudyName::list())]
    Unknown(String),
    #[error("invalid study config: {0}")]
    Config(#[from] serde_json::Error),
    #[error(transparent)]
    Study(#[from] StudyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Output(#[from] OutputError),
}

impl RunError {
    /// Numerical failures rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, RunError::Solver(_) | RunError::Interp(_) | RunError::Study(StudyError::Train(_)))
            || matches!(self, RunError::Study(StudyError::Experiment(e)) if !matches!(e, denots_core::experiment::ExperimentError::Invalid { .. }))
    }
}

/// A study: configuration with defaults, a runner, and the assertion it checks.
pub trait Study {
    type Config: Serialize + DeserializeOwned + Default;
    type Report: Serialize + Tabular;
    fn run(cfg: &Self::Config, seed: u64) -> Result<Self::Report, RunError>;
    fn passed(cfg: &Self::Config, report: &Self::Report) -> bool;
}

fn shifted(seeds: &[u64], root: u64) -> Vec<u64> {
    seeds.iter().map(|s| s + root).collect()
}

pub struct Iss;

impl Study for Iss {
    type Config = IssSweepConfig;
    type Report = IssSweepReport;
    fn run(cfg: &Self::Config, seed: u64) -> Result<Self::Report, RunError> {
        Ok(iss_sweep(cfg, seed)?)
    }
    fn passed(_: &Self::Config, report: &Self::Report) -> bool {
        report.passed
    }
}

pub struct Forgetting;

impl Study for Forgetting {
    type Config = ForgettingSweepConfig;
    type Report = ForgettingSweepReport;
    fn run(cfg: &Self::Config, seed: u64) -> Result<Self::Report, RunError> {
        Ok(forgetting_sweep(cfg, seed)?)
    }
    fn passed(_: &Self::Config, report: &Self::Report) -> bool {
        report.passed
    }
}

pub struct SplineError;

impl Study for SplineError {
    type Config = SplineStudyConfig;
    type Report = SplineStudyReport;
    fn run(cfg: &Self::Config, seed: u64) -> Result<Self::Report, RunError> {
        Ok(spline_error_study(cfg, seed)?)
    }
    fn passed(_: &Self::Config, report: &Self::Report) -> bool {
        report.constant_within_tolerance && report.exponent_in_range
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionConfig {
    pub iterations: usize,
}

impl Default for AssumptionConfig {
    fn default() -> Self {
        Self { iterations: 1000 }
    }
}

pub struct AssumptionMc;

impl Study for AssumptionMc {
    type Config = AssumptionConfig;
    type Report = AssumptionReport;
    fn run(cfg: &Self::Config, seed: u64) -> Result<Self::Report, RunError> {
        Ok(assumption_test_mc(cfg.iterations, &mut substream(seed, "assumption")))
    }
    fn passed(_: &Self::Config, report: &Self::Report) -> bool {
        report.passed()
    }
}

pub struct Robustness;

impl Study for Robustness {
    type Config = RobustnessStudyConfig;
    type Report = RobustnessStudyReport;
    fn run(cfg: &Self::Config, seed: u64) -> Result<Self::Report, RunError> {
        Ok(robustness_study(cfg, seed)?)
    }
    fn passed(_: &Self::Config, report: &Self::Report) -> bool {
        report.passed
    }
}

/// NFE sweeps over several fields: some expected to correlate with the metric,
/// some not.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NfeStudyConfig {
    pub base: ExperimentConfig,
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Fields whose Pearson and Spearman must reach `min_correlation`.
    pub correlated: Vec<FieldKind>,
    /// Fields whose Pearson must stay at or below `max_uncorrelated`.
    pub uncorrelated: Vec<FieldKind>,
    pub min_correlation: f64,
    pub max_uncorrelated: f64,
}

impl Default for NfeStudyConfig {
    fn default() -> Self {
        let mut dataset = DatasetSpec::new(DatasetKind::Sine2, 500);
        dataset.length = Some((20, 20));
        let mut base = ExperimentConfig::new(dataset);
        base.training = TrainConfig { batch_size: Some(32), max_epochs: Some(200), ..TrainConfig::default() };
        Self {
            base,
            axis: SweepAxis::Scale,
            grid: vec![1.0, 2.0, 5.0, 10.0, 20.0],
            seeds: vec![0, 1, 2],
            correlated: vec![FieldKind::AntiNf],
            uncorrelated: vec![FieldKind::NoNf],
            min_correlation: 0.7,
            max_uncorrelated: 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NfeStudyReport {
    pub sweeps: Vec<NfeSweepReport>,
}

impl NfeStudyReport {
    pub fn sweep(&self, field: FieldKind) -> Option<&NfeSweepReport> {
        self.sweeps.iter().find(|s| s.field == field)
    }
}

pub struct NfeSweep;

impl Study for NfeSweep {
    type Config = NfeStudyConfig;
    type Report = NfeStudyReport;
    fn run(cfg: &Self::Config, seed: u64) -> Result<Self::Report, RunError> {
        let sweeps = cfg
            .correlated
            .iter()
            .chain(&cfg.uncorrelated)
            .map(|&field| {
                let sweep = NfeSweepConfig {
                    base: ExperimentConfig { field, ..cfg.base.clone() },
                    axis: cfg.axis,
                    grid: cfg.grid.clone(),
                    seeds: shifted(&cfg.seeds, seed),
                };
                nfe_metric_sweep(&sweep)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(NfeStudyReport { sweeps })
    }
    fn passed(cfg: &Self::Config, report: &Self::Report) -> bool {
        let up = cfg.correlated.iter().all(|&f| {
            report.sweep(f).is_some_and(|s| s.pearson >= cfg.min_correlation && s.spearman >= cfg.min_correlation)
        });
        let flat = cfg.uncorrelated.iter().all(|&f| report.sweep(f).is_some_and(|s| s.pearson <= cfg.max_uncorrelated));
        up && flat
    }
}

fn pendulum(n: usize) -> DatasetSpec {
    let mut spec = DatasetSpec::new(DatasetKind::Pendulum, n);
    spec.length = Some((100, 100));
    spec
}

fn quick_training() -> TrainConfig {
    TrainConfig { batch_size: Some(32), ..TrainConfig::default() }
}

/// Trained Sync-NF and Anti-NF trajectories at a large time scale, and
/// random-init No-NF trajectories at a small and a large one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStudyConfig {
    pub trained: TrajectoryStudyConfig,
    pub random_init: TrajectoryStudyConfig,
    /// Componentwise bound on trained Sync-NF states.
    pub sync_box: f64,
    /// Required ratio of No-NF sup-norms between the largest and smallest scale.
    pub growth: f64,
}

impl Default for NormStudyConfig {
    fn default() -> Self {
        let trained = TrajectoryStudyConfig {
            dataset: pendulum(300),
            kinds: vec![FieldKind::SyncNf, FieldKind::AntiNf],
            scales: vec![20.0],
            seeds: vec![0, 1, 2],
            hidden_dim: 32,
            solver: SolverConfig::default(),
            trained: true,
            training: quick_training(),
            sequences: 16,
            samples: 50,
            divergence_threshold: 1e6,
        };
        let random_init = TrajectoryStudyConfig {
            kinds: vec![FieldKind::NoNf],
            scales: vec![1.0, 20.0],
            trained: false,
            ..trained.clone()
        };
        Self { trained, random_init, sync_box: 1.05, growth: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStudyReport {
    pub trained: TrajectoryReport,
    pub random_init: TrajectoryReport,
    pub sync_bounded: bool,
    pub anti_stable: bool,
    pub no_nf_growth: Option<f64>,
}

pub struct NormStudy;

impl Study for NormStudy {
    type Config = NormStudyConfig;
    type Report = NormStudyReport;
    fn run(cfg: &Self::Config, seed: u64) -> Result<Self::Report, RunError> {
        let shift = |c: &TrajectoryStudyConfig| TrajectoryStudyConfig { seeds: shifted(&c.seeds, seed), ..c.clone() };
        let trained = trajectory_norm_study(&shift(&cfg.trained))?;
        let random_init = trajectory_norm_study(&shift(&cfg.random_init))?;
        let sync_bounded = trained
            .rows
            .iter()
            .filter(|r| r.kind == FieldKind::SyncNf)
            .all(|r| !r.diverged && r.max_abs_component <= cfg.sync_box);
        let anti_stable = trained.rows.iter().filter(|r| r.kind == FieldKind::AntiNf).all(|r| !r.diverged);
        let scales = &cfg.random_init.scales;
        let sup = |scale: f64| {
            let v: Vec<f64> = random_init.rows_for(FieldKind::NoNf, scale).map(|r| r.sup_norm).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        let lo = scales.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = scales.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let no_nf_growth = match (sup(lo), sup(hi)) {
            (Some(a), Some(b)) if lo < hi && a > 0.0 => Some(b / a),
            _ => None,
        };
        Ok(NormStudyReport { trained, random_init, sync_bounded, anti_stable, no_nf_growth })
    }
    fn passed(cfg: &Self::Config, report: &Self::Report) -> bool {
        report.sync_bounded && report.anti_stable && report.no_nf_growth.is_some_and(|g| g >= cfg.growth)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinemixStudyConfig {
    pub bench: MemoryBenchConfig,
    /// Every Anti-NF seed must reach this R².
    pub anti_nf_min: f64,
    /// Mean R² ceiling of the vanilla RNN.
    pub rnn_max: f64,
    /// Mean R² floor of the GRU baseline.
    pub gru_min: f64,
}

impl Default for SinemixStudyConfig {
    fn default() -> Self {
        let bench = MemoryBenchConfig {
            dataset: DatasetSpec::new(DatasetKind::SineMix, 1000),
            hidden_dim: 32,
            scale: 20.0,
            solver: SolverConfig::default(),
            training: TrainConfig { batch_size: Some(32), patience: 30, max_epochs: Some(150), lr: 1e-3 },
            baseline_training: Some(TrainConfig {
                batch_size: Some(16),
                patience: 400,
                max_epochs: Some(400),
                lr: 1e-3,
            }),
            seeds: vec![0, 1, 2],
            backbones: vec![Backbone::AntiNf, Backbone::Rnn, Backbone::Gru],
        };
        Self { bench, anti_nf_min: 0.95, rnn_max: 0.5, gru_min: 0.9 }
    }
}

pub struct SinemixBench;

impl Study for SinemixBench {
    type Config = SinemixStudyConfig;
    type Report = MemoryReport;
    fn run(cfg: &Self::Config, seed: u64) -> Result<Self::Report, RunError> {
        Ok(sinemix_memory_bench(&MemoryBenchConfig { seeds: shifted(&cfg.bench.seeds, seed), ..cfg.bench.clone() })?)
    }
    fn passed(cfg: &Self::Config, report: &Self::Report) -> bool {
        let check = |b: Backbone, ok: &dyn Fn(&crate::experiments::MemorySummary) -> bool| {
            !cfg.bench.backbones.contains(&b) || report.summary_for(b).is_some_and(ok)
        };
        check(Backbone::AntiNf, &|s| s.diverged == 0 && s.min_r2 >= cfg.anti_nf_min)
            && check(Backbone::Rnn, &|s| s.mean_r2 <= cfg.rnn_max)
            && check(Backbone::Gru, &|s| s.mean_r2 >= cfg.gru_min)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightNormStudyConfig {
    pub norms: WeightNormConfig,
    pub max_spearman: f64,
}

impl Default for WeightNormStudyConfig {
    fn default() -> Self {
        let mut base = ExperimentConfig::new(pendulum(300));
        base.field = FieldKind::MlpTanh;
        base.training = quick_training();
        let norms = WeightNormConfig { base, scales: vec![1.0, 2.0, 5.0, 10.0, 20.0], seeds: vec![0], trained: true };
        Self { norms, max_spearman: -0.5 }
    }
}

pub struct L2VsScale;

impl Study for L2VsScale {
    type Config = WeightNormStudyConfig;
    type Report = WeightNormReport;
    fn run(cfg: &Self::Config, seed: u64) -> Result<Self::Report, RunError> {
        Ok(l2_norm_vs_scale(&WeightNormConfig { seeds: shifted(&cfg.norms.seeds, seed), ..cfg.norms.clone() })?)
    }
    fn passed(cfg: &Self::Config, report: &Self::Report) -> bool {
        report.spearman <= cfg.max_spearman
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpScaleStudyConfig {
    pub study: BumpStudyConfig,
    /// Required gain of the scaled model's mean metric over the default model.
    pub min_gain: f64,
    pub min_scaled: f64,
}

impl Default for BumpScaleStudyConfig {
    fn default() -> Self {
        let mut base = ExperimentConfig::new(DatasetSpec::new(DatasetKind::Bump, 1000));
        base.field = FieldKind::MlpTanh;
        base.training = quick_training();
        let study = BumpStudyConfig {
            base,
            seeds: vec![0, 1, 2],
            scales: vec![1.0, 5.0, 20.0, 50.0, 100.0],
            tolerance: 1e-6,
        };
        Self { study, min_gain: 0.10, min_scaled: 0.92 }
    }
}

pub struct BumpScale;

impl Study for BumpScale {
    type Config = BumpScaleStudyConfig;
    type Report = BumpReport;
    fn run(cfg: &Self::Config, seed: u64) -> Result<Self::Report, RunError> {
        Ok(bump_scale_study(&BumpStudyConfig { seeds: shifted(&cfg.study.seeds, seed), ..cfg.study.clone() })?)
    }
    fn passed(cfg: &Self::Config, report: &Self::Report) -> bool {
        report.mean_scale - report.mean_default >= cfg.min_gain && report.mean_scale >= cfg.min_scaled
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackOrderingConfig {
    pub study: AttackStudyConfig,
    /// Fields expected to beat `reference` under attack.
    pub robust: Vec<FieldKind>,
    pub reference: FieldKind,
}

impl Default for AttackOrderingConfig {
    fn default() -> Self {
        let mut base = ExperimentConfig::new(pendulum(300));
        base.scale = 5.0;
        base.training = quick_training();
        let study = AttackStudyConfig {
            base,
            kinds: vec![FieldKind::NoNf, FieldKind::SyncNf, FieldKind::AntiNf],
            model_seeds: vec![0, 1, 2],
            attack_seeds: vec![0, 1, 2, 3, 4],
            attack: AttackKind::Change,
            fraction: 0.01,
        };
        Self { study, robust: vec![FieldKind::SyncNf, FieldKind::AntiNf], reference: FieldKind::NoNf }
    }
}

pub struct AttackOrdering;

impl Study for AttackOrdering {
    type Config = AttackOrderingConfig;
    type Report = AttackReport;
    fn run(cfg: &Self::Config, seed: u64) -> Result<Self::Report, RunError> {
        Ok(attack_study(&AttackStudyConfig { model_seeds: shifted(&cfg.study.model_seeds, seed), ..cfg.study.clone() })?)
    }
    fn passed(cfg: &Self::Config, report: &Self::Report) -> bool {
        report
            .attacked(cfg.reference)
            .is_some_and(|r| cfg.robust.iter().all(|&k| report.attacked(k).is_some_and(|a| a > r)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StudyName {
    Iss,
    Forgetting,
    SplineError,
    AssumptionMc,
    Robustness,
    NfeSweep,
    NormStudy,
    SinemixBench,
    L2VsScale,
    BumpScale,
    AttackOrdering,
}

impl StudyName {
    pub const ALL: [StudyName; 11] = [
        StudyName::Iss,
        StudyName::Forgetting,
        StudyName::SplineError,
        StudyName::AssumptionMc,
        StudyName::Robustness,
        StudyName::NfeSweep,
        StudyName::NormStudy,
        StudyName::SinemixBench,
        StudyName::L2VsScale,
        StudyName::BumpScale,
        StudyName::AttackOrdering,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StudyName::Iss => "iss",
            StudyName::Forgetting => "forgetting",
            StudyName::SplineError => "spline-error",
            StudyName::AssumptionMc => "assumption-mc",
            StudyName::Robustness => "robustness",
            StudyName::NfeSweep => "nfe-sweep",
            StudyName::NormStudy => "norm-study",
            StudyName::SinemixBench => "sinemix-bench",
            StudyName::L2VsScale => "l2-vs-scale",
            StudyName::BumpScale => "bump-scale",
            StudyName::AttackOrdering => "attack-ordering",
        }
    }

    pub fn list() -> String {
        Self::ALL.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
    }

    /// Parses `config` as this study's configuration.
    pub fn check_config(self, config: &serde_json::Value) -> Result<(), RunError> {
        fn parse<S: Study>(v: &serde_json::Value) -> Result<(), RunError> {
            S::Config::deserialize(v).map(|_| ()).map_err(RunError::Config)
        }
        match self {
            StudyName::Iss => parse::<Iss>(config),
            StudyName::Forgetting => parse::<Forgetting>(config),
            StudyName::SplineError => parse::<SplineError>(config),
            StudyName::AssumptionMc => parse::<AssumptionMc>(config),
            StudyName::Robustness => parse::<Robustness>(config),
            StudyName::NfeSweep => parse::<NfeSweep>(config),
            StudyName::NormStudy => parse::<NormStudy>(config),
            StudyName::SinemixBench => parse::<SinemixBench>(config),
            StudyName::L2VsScale => parse::<L2VsScale>(config),
            StudyName::BumpScale => parse::<BumpScale>(config),
            StudyName::AttackOrdering => parse::<AttackOrdering>(config),
        }
    }

    /// Default configuration as JSON.
    pub fn default_config(self) -> serde_json::Value {
        fn json<S: Study>() -> serde_json::Value {
            serde_json::to_value(S::Config::default()).expect("config serializes")
        }
        match self {
            StudyName::Iss => json::<Iss>(),
            StudyName::Forgetting => json::<Forgetting>(),
            StudyName::SplineError => json::<SplineError>(),
            StudyName::AssumptionMc => json::<AssumptionMc>(),
            StudyName::Robustness => json::<Robustness>(),
            StudyName::NfeSweep => json::<NfeSweep>(),
            StudyName::NormStudy => json::<NormStudy>(),
            StudyName::SinemixBench => json::<SinemixBench>(),
            StudyName::L2VsScale => json::<L2VsScale>(),
            StudyName::BumpScale => json::<BumpScale>(),
            StudyName::AttackOrdering => json::<AttackOrdering>(),
        }
    }
}

impl fmt::Display for StudyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StudyName {
    type Err = RunError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|n| n.as_str() == s).ok_or_else(|| RunError::Unknown(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyOutcome {
    pub passed: bool,
    pub files: StudyFiles,
    pub report: serde_json::Value,
}

/// Recursively overlays `patch` onto `base`; objects merge key by key.
pub fn merge_json(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                merge_json(b.entry(k).or_insert(serde_json::Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

fn execute<S: Study>(name: StudyName, config: serde_json::Value, seed: u64, dir: &Path) -> Result<StudyOutcome, RunError> {
    let cfg: S::Config = serde_json::from_value(config)?;
    let report = S::run(&cfg, seed)?;
    let passed = S::passed(&cfg, &report);
    let keyed = serde_json::json!({ "seed": seed, "config": &cfg });
    let files = emit(dir, name.as_str(), &keyed, &report, Some(passed))?;
    Ok(StudyOutcome { passed, files, report: serde_json::to_value(&report)? })
}

/// Runs a study with `overrides` merged over its defaults and writes its
/// CSV and JSON summary under `dir`.
pub fn run_study(name: StudyName, overrides: serde_json::Value, seed: u64, dir: &Path) -> Result<StudyOutcome, RunError> {
    let mut config = name.default_config();
    merge_json(&mut config, overrides);
    match name {
        StudyName::Iss => execute::<Iss>(name, config, seed, dir),
        StudyName::Forgetting => execute::<Forgetting>(name, config, seed, dir),
        StudyName::SplineError => execute::<SplineError>(name, config, seed, dir),
        StudyName::AssumptionMc => execute::<AssumptionMc>(name, config, seed, dir),
        StudyName::Robustness => execute::<Robustness>(name, config, seed, dir),
        StudyName::NfeSweep => execute::<NfeSweep>(name, config, seed, dir),
        StudyName::NormStudy => execute::<NormStudy>(name, config, seed, dir),
        StudyName::SinemixBench => execute::<SinemixBench>(name, config, seed, dir),
        StudyName::L2VsScale => execute::<L2VsScale>(name, config, seed, dir),
        StudyName::BumpScale => execute::<BumpScale>(name, config, seed, dir),
        StudyName::AttackOrdering => execute::<AttackOrdering>(name, config, seed, dir),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for n in StudyName::ALL {
            assert_eq!(n.as_str().parse::<StudyName>().unwrap(), n);
        }
        let err = "bogus".parse::<StudyName>().unwrap_err().to_string();
        assert!(err.contains("assumption-mc") && err.contains("sinemix-bench"));
    }

    #[test]
    fn default_configs_deserialize() {
        for n in StudyName::ALL {
            n.check_config(&n.default_config()).unwrap();
        }
        let bad = serde_json::json!({"iterations": "many"});
        assert!(matches!(StudyName::AssumptionMc.check_config(&bad), Err(RunError::Config(_))));
    }

    #[test]
    fn merge_overrides_nested_keys() {
        let mut base = serde_json::json!({"a": {"b": 1, "c": 2}, "d": 3});
        merge_json(&mut base, serde_json::json!({"a": {"b": 5}}));
        assert_eq!(base, serde_json::json!({"a": {"b": 5, "c": 2}, "d": 3}));
    }

    #[test]
    fn small_robustness_run_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_study(StudyName::Robustness, serde_json::json!({"cases": 2}), 0, dir.path()).unwrap();
        assert!(out.passed);
        assert!(out.files.csv.exists() && out.files.json.exists());
    }
}
