//! Study outputs: a CSV of raw points plus a JSON summary, both named by the
//! config hash.

use crate::experiments::{AttackReport, BumpReport, MemoryReport, NfeSweepReport, TrajectoryReport, WeightNormReport};
use crate::gp::AssumptionReport;
use crate::stability::{ForgettingCurve, TightnessReport};
use crate::studies::{NfeStudyReport, NormStudyReport};
use crate::theory::{ForgettingSweepReport, GateForgettingReport, IssSweepReport, RobustnessStudyReport, SplineStudyReport};
use denots_core::io::sha256_hex;
use serde::Serialize;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Fs { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Rows of raw points for the CSV file.
pub trait Tabular {
    fn header(&self) -> Vec<&'static str>;
    fn rows(&self) -> Vec<Vec<String>>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyFiles {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub hash: String,
}

pub fn config_hash<C: Serialize>(config: &C) -> Result<String, OutputError> {
    Ok(sha256_hex(serde_json::to_string(config)?.as_bytes())[..16].to_string())
}

/// Writes `<name>-<hash>.csv` and `<name>-<hash>.json` under `dir`.
pub fn emit<C, R>(dir: &Path, name: &str, config: &C, report: &R, passed: Option<bool>) -> Result<StudyFiles, OutputError>
where
    C: Serialize,
    R: Serialize + Tabular,
{
    std::fs::create_dir_all(dir).map_err(|source| OutputError::Fs { path: dir.to_path_buf(), source })?;
    let hash = config_hash(config)?;
    let csv_path = dir.join(format!("{name}-{hash}.csv"));
    let json_path = dir.join(format!("{name}-{hash}.json"));
    let csv_err = |source| OutputError::Csv { path: csv_path.clone(), source };
    let mut w = csv::Writer::from_path(&csv_path).map_err(csv_err)?;
    w.write_record(report.header()).map_err(csv_err)?;
    for row in report.rows() {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| OutputError::Fs { path: csv_path.clone(), source })?;
    let summary = serde_json::json!({
        "study": name,
        "config_hash": hash,
        "passed": passed,
        "config": config,
        "report": report,
    });
    std::fs::write(&json_path, serde_json::to_vec_pretty(&summary)?)
        .map_err(|source| OutputError::Fs { path: json_path.clone(), source })?;
    Ok(StudyFiles { csv: csv_path, json: json_path, hash })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn curve_rows(label: &str, c: &ForgettingCurve) -> Vec<Vec<String>> {
    c.points.iter().map(|(t, s)| vec![label.to_string(), t.to_string(), s.to_string()]).collect()
}

impl Tabular for IssSweepReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["index", "margin", "h0_norm", "chi0", "bound", "max_norm", "violations"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.cases
            .iter()
            .map(|c| {
                vec![
                    c.index.to_string(),
                    c.margin.to_string(),
                    c.h0_norm.to_string(),
                    c.chi0.to_string(),
                    c.bound.to_string(),
                    c.max_norm.to_string(),
                    c.violations.to_string(),
                ]
            })
            .collect()
    }
}

impl Tabular for ForgettingSweepReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["index", "margin", "coord", "final_sensitivity", "strictly_decreasing"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.cases
            .iter()
            .map(|c| {
                vec![
                    c.index.to_string(),
                    c.margin.to_string(),
                    c.coord.to_string(),
                    c.final_sensitivity.to_string(),
                    c.strictly_decreasing.to_string(),
                ]
            })
            .collect()
    }
}

impl Tabular for GateForgettingReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["field", "tau", "sensitivity"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        let mut rows = curve_rows("anti-nf", &self.anti_nf);
        rows.extend(curve_rows("sync-nf", &self.sync_nf));
        rows
    }
}

impl Tabular for SplineStudyReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["delta", "xi", "estimate", "standard_error", "normalized", "theory_constant", "relative_deviation"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.estimates
            .iter()
            .map(|e| {
                vec![
                    e.delta.to_string(),
                    e.xi.to_string(),
                    e.estimate.to_string(),
                    e.standard_error.to_string(),
                    e.normalized.to_string(),
                    e.theory_constant.to_string(),
                    e.relative_deviation.to_string(),
                ]
            })
            .collect()
    }
}

impl Tabular for AssumptionReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["n", "shift", "split", "query", "log_variance", "log_stretched_variance", "retries", "holds"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.trials
            .iter()
            .map(|t| {
                vec![
                    t.n.to_string(),
                    t.shift.to_string(),
                    t.split.to_string(),
                    t.query.to_string(),
                    t.log_variance.to_string(),
                    t.log_stretched_variance.to_string(),
                    t.retries.to_string(),
                    t.holds().to_string(),
                ]
            })
            .collect()
    }
}

impl Tabular for TightnessReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["epsilon", "t", "measured_gap", "closed_form_gap", "limit", "pointwise_bound", "max_gap"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        vec![vec![
            self.epsilon.to_string(),
            self.t.to_string(),
            self.measured_gap.to_string(),
            self.closed_form_gap.to_string(),
            self.limit.to_string(),
            self.pointwise_bound.to_string(),
            self.max_gap.to_string(),
        ]]
    }
}

impl Tabular for BumpReport {
    fn header(&self) -> Vec<&'static str> {
        vec![
            "seed",
            "default_metric",
            "default_nfe",
            "tolerance_metric",
            "tolerance_nfe",
            "scale_metric",
            "scale_nfe",
            "chosen_scale",
        ]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.seed.to_string(),
                    r.default_metric.to_string(),
                    r.default_nfe.to_string(),
                    r.tolerance_metric.to_string(),
                    r.tolerance_nfe.to_string(),
                    r.scale_metric.to_string(),
                    r.scale_nfe.to_string(),
                    r.chosen_scale.to_string(),
                ]
            })
            .collect()
    }
}

impl Tabular for MemoryReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["backbone", "seed", "r2", "best_epoch", "epochs", "mean_update_gate"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    serde_json::to_value(r.backbone).map(|v| v.as_str().unwrap_or_default().to_string()).unwrap_or_default(),
                    r.seed.to_string(),
                    opt(r.r2),
                    r.best_epoch.to_string(),
                    r.epochs.to_string(),
                    opt(r.mean_update_gate),
                ]
            })
            .collect()
    }
}

impl Tabular for NfeSweepReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["value", "seed", "nfe", "metric", "diverged"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.points
            .iter()
            .map(|p| vec![p.value.to_string(), p.seed.to_string(), p.nfe.to_string(), p.metric.to_string(), p.diverged.to_string()])
            .collect()
    }
}

impl Tabular for WeightNormReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["scale", "seed", "l2"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.rows.iter().map(|r| vec![r.scale.to_string(), r.seed.to_string(), opt(r.l2)]).collect()
    }
}

impl Tabular for TrajectoryReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["field", "scale", "seed", "trained", "fraction", "mean_norm", "sup_norm", "max_abs_component", "diverged"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        let mut out = Vec::new();
        for r in &self.rows {
            for (f, n) in &r.curve {
                out.push(vec![
                    r.kind.to_string(),
                    r.scale.to_string(),
                    r.seed.to_string(),
                    r.trained.to_string(),
                    f.to_string(),
                    n.to_string(),
                    r.sup_norm.to_string(),
                    r.max_abs_component.to_string(),
                    r.diverged.to_string(),
                ]);
            }
        }
        out
    }
}

impl Tabular for AttackReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["field", "model_seed", "clean", "attacked_mean", "attacked_std"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| vec![r.kind.to_string(), r.model_seed.to_string(), opt(r.clean), opt(r.attacked_mean), opt(r.attacked_std)])
            .collect()
    }
}

impl Tabular for RobustnessStudyReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["case", "max_gap", "pointwise_bound", "interval_gap", "interval_bound", "passed"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        let mut rows: Vec<Vec<String>> = self
            .cases
            .iter()
            .map(|c| {
                vec![
                    c.index.to_string(),
                    c.max_gap.to_string(),
                    c.pointwise_bound.to_string(),
                    c.interval_gap.to_string(),
                    c.interval_bound.to_string(),
                    c.passed.to_string(),
                ]
            })
            .collect();
        let t = &self.tightness;
        rows.push(vec![
            "tightness".into(),
            t.measured_gap.to_string(),
            t.pointwise_bound.to_string(),
            t.limit.to_string(),
            String::new(),
            self.tightness_passed.to_string(),
        ]);
        rows
    }
}

impl Tabular for NfeStudyReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["field", "value", "seed", "nfe", "metric", "diverged"]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.sweeps
            .iter()
            .flat_map(|s| {
                s.rows().into_iter().map(move |mut r| {
                    r.insert(0, s.field.to_string());
                    r
                })
            })
            .collect()
    }
}

impl Tabular for NormStudyReport {
    fn header(&self) -> Vec<&'static str> {
        self.trained.header()
    }
    fn rows(&self) -> Vec<Vec<String>> {
        let mut rows = self.trained.rows();
        rows.extend(self.random_init.rows());
        rows
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emit_names_files_by_config_hash() {
        let dir = tempfile::tempdir().unwrap();
        let report = crate::stability::tightness(2.0, 1.0, 0.5, 40.0).unwrap();
        let cfg = serde_json::json!({"a": 2.0, "b": 1.0});
        let files = emit(dir.path(), "tightness", &cfg, &report, Some(true)).unwrap();
        assert_eq!(files.hash, config_hash(&cfg).unwrap());
        assert!(files.csv.file_name().unwrap().to_str().unwrap().contains(&files.hash));
        let text = std::fs::read_to_string(&files.csv).unwrap();
        assert_eq!(text.lines().count(), 2);
        let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&files.json).unwrap()).unwrap();
        assert_eq!(json["passed"], true);
    }
}
