//! Grid sweeps over tolerance or time scale with a resumable manifest and a
//! bounded worker pool.

use crate::config::{load_experiment, out_dir, ExperimentFlags};
use crate::error::CliError;
use crate::svg;
use denots_core::experiment::{run_on_splits, ExperimentConfig};
use denots_core::io::sha256_hex;
use denots_lab::experiments::{aggregate_sweep, is_divergence, NfeSweepConfig, SweepAxis, SweepPoint};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

pub struct SweepArgs {
    pub config: Option<PathBuf>,
    pub axis: String,
    pub grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub svg: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Completed {
    config_hash: String,
    point: SweepPoint,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
struct SweepManifest {
    completed: Vec<Completed>,
}

/// `DENOTS_WORKERS`, else the available parallelism.
pub fn workers() -> usize {
    std::env::var("DENOTS_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn read_manifest(path: &Path) -> Result<SweepManifest, CliError> {
    if !path.exists() {
        return Ok(SweepManifest::default());
    }
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

fn write_manifest(path: &Path, m: &SweepManifest) -> Result<(), CliError> {
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, serde_json::to_vec_pretty(m)?)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn run_point(cfg: &ExperimentConfig, value: f64) -> Result<SweepPoint, CliError> {
    let splits = cfg.splits().map_err(|e| CliError::Validation(e.to_string()))?;
    match run_on_splits(cfg, &splits, |_| {}) {
        Ok(o) => Ok(SweepPoint { value, seed: cfg.seed, nfe: o.test_nfe, metric: o.test_metric, diverged: false }),
        Err(e) if is_divergence(&e) => {
            log::warn!("point {value} seed {} diverged: {e}", cfg.seed);
            Ok(SweepPoint { value, seed: cfg.seed, nfe: f64::NAN, metric: f64::NAN, diverged: true })
        }
        Err(e) => Err(CliError::Io(e.to_string())),
    }
}

pub fn run(args: &SweepArgs, flags: &ExperimentFlags) -> Result<(), CliError> {
    let axis: SweepAxis = serde_json::from_value(json!(args.axis))
        .map_err(|_| CliError::Validation(format!("unknown axis `{}`; expected scale or tolerance", args.axis)))?;
    if args.grid.is_empty() || args.seeds.is_empty() {
        return Err(CliError::Validation("grid and seeds must be non-empty".into()));
    }
    let base = load_experiment(args.config.as_deref(), flags)?;
    let sweep = NfeSweepConfig { base: base.clone(), axis, grid: args.grid.clone(), seeds: args.seeds.clone() };
    let jobs: Vec<(f64, ExperimentConfig)> = args
        .grid
        .iter()
        .flat_map(|&v| args.seeds.iter().map(move |&s| (v, s)))
        .map(|(v, s)| (v, sweep.point_config(v, s)))
        .collect();
    for (_, c) in &jobs {
        c.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    }
    let mut sweep_key = sweep.clone();
    sweep_key.base.out = None;
    let hash = sha256_hex(serde_json::to_string(&sweep_key)?.as_bytes())[..16].to_string();
    let dir = out_dir(&base);
    std::fs::create_dir_all(&dir)?;
    let manifest_path = dir.join(format!("sweep-{hash}.manifest.json"));
    let mut manifest = read_manifest(&manifest_path)?;
    let pending: Vec<(f64, ExperimentConfig)> =
        jobs.iter().filter(|(_, c)| !manifest.completed.iter().any(|d| d.config_hash == c.hash())).cloned().collect();
    log::info!("sweep {hash}: {} of {} points pending", pending.len(), jobs.len());

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(String, Result<SweepPoint, CliError>)>();
    let mut failure = None;
    std::thread::scope(|scope| {
        for _ in 0..workers().min(pending.len()) {
            let tx = tx.clone();
            let (next, pending) = (&next, &pending);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((value, cfg)) = pending.get(i) else { break };
                if tx.send((cfg.hash(), run_point(cfg, *value))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (config_hash, result) in rx {
            match result {
                Ok(point) => {
                    log::info!("point {} seed {}: nfe {:.1} metric {:.4}", point.value, point.seed, point.nfe, point.metric);
                    manifest.completed.push(Completed { config_hash, point });
                    if let Err(e) = write_manifest(&manifest_path, &manifest) {
                        failure.get_or_insert(e);
                    }
                }
                Err(e) => {
                    failure.get_or_insert(e);
                }
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }

    let mut points: Vec<SweepPoint> = jobs
        .iter()
        .filter_map(|(_, c)| manifest.completed.iter().find(|d| d.config_hash == c.hash()).map(|d| d.point.clone()))
        .collect();
    points.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.seed.cmp(&b.seed)));
    if points.iter().all(|p| p.diverged) {
        return Err(CliError::Divergence("every sweep point diverged".into()));
    }
    let csv_path = dir.join(format!("sweep-{hash}.csv"));
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["value", "seed", "nfe", "metric", "diverged"])?;
    for p in &points {
        w.write_record([p.value.to_string(), p.seed.to_string(), p.nfe.to_string(), p.metric.to_string(), p.diverged.to_string()])?;
    }
    w.flush()?;
    let agg = aggregate_sweep(&args.grid, &points);
    let summary = match &agg {
        Ok(a) => json!({ "config_hash": hash, "axis": axis, "field": base.field, "means": a.means, "excluded": a.excluded, "pearson": a.pearson, "spearman": a.spearman, "sweep": sweep_key }),
        Err(e) => json!({ "config_hash": hash, "axis": axis, "field": base.field, "correlation_error": e.to_string(), "sweep": sweep_key }),
    };
    let json_path = dir.join(format!("sweep-{hash}.json"));
    std::fs::write(&json_path, serde_json::to_vec_pretty(&summary)?)?;
    if args.svg {
        if let Ok(a) = &agg {
            let pts: Vec<(f64, f64)> = a.means.iter().map(|m| (m.1.ln(), m.2)).collect();
            let chart = svg::line_chart(&format!("{} sweep", args.axis), "log NFE", "metric", &[(&base.field.to_string(), &pts)]);
            std::fs::write(dir.join(format!("sweep-{hash}.svg")), chart)?;
        }
    }
    println!("{}", json_path.display());
    Ok(())
}
