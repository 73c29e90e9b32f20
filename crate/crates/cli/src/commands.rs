use crate::config::{load_experiment, out_dir, read_json, set_path, ExperimentFlags};
use crate::error::CliError;
use crate::svg;
use denots_core::datagen::{AttackKind, Splits};
use denots_core::experiment::{run_on_splits, ExperimentConfig, ExperimentError};
use denots_core::io::{file_sha256, load_model, read_dataset, save_model, sha256_hex, write_dataset, MANIFEST_FILE};
use denots_core::model::{SequenceModel, TaskKind};
use denots_core::train::evaluate;
use denots_lab::experiments::{attack_curve, is_divergence};
use denots_lab::studies::{run_study, StudyName};
use serde_json::json;
use std::io::Write;
use std::path::{Path, PathBuf};

pub fn metric_name(task: TaskKind) -> &'static str {
    match task {
        TaskKind::Binary => "auroc",
        TaskKind::Multiclass => "accuracy",
        TaskKind::Regression | TaskKind::Forecast => "r2",
    }
}

fn experiment_error(e: ExperimentError) -> CliError {
    if is_divergence(&e) {
        return CliError::Divergence(e.to_string());
    }
    match e {
        ExperimentError::Invalid { .. } | ExperimentError::Datagen(_) => CliError::Validation(e.to_string()),
        other => CliError::Io(other.to_string()),
    }
}

fn data_dir(cfg: &ExperimentConfig) -> PathBuf {
    out_dir(cfg).join(format!("data-{}", dataset_hash(cfg)))
}

/// Hash of the dataset spec and seed only.
fn dataset_hash(cfg: &ExperimentConfig) -> String {
    let key = serde_json::to_string(&json!({ "dataset": cfg.dataset, "seed": cfg.seed })).expect("serializable");
    sha256_hex(key.as_bytes())[..16].to_string()
}

/// An existing dataset directory whose manifest matches and whose checksums verify.
fn up_to_date(dir: &Path, hash: &str) -> bool {
    dir.join(MANIFEST_FILE).exists() && matches!(read_dataset(dir), Ok((m, _)) if m.config_hash == hash)
}

pub fn generate(config: Option<&Path>, flags: &ExperimentFlags) -> Result<(), CliError> {
    let cfg = load_experiment(config, flags)?;
    let dir = data_dir(&cfg);
    let hash = dataset_hash(&cfg);
    if up_to_date(&dir, &hash) {
        log::info!("dataset {} is up to date", dir.display());
        println!("{}", dir.display());
        return Ok(());
    }
    let splits = cfg.splits().map_err(experiment_error)?;
    let manifest = write_dataset(&dir, &cfg.dataset, cfg.seed, &hash, &splits)?;
    log::info!(
        "wrote {} train / {} val / {} test sequences to {}",
        manifest.train.sequences,
        manifest.val.sequences,
        manifest.test.sequences,
        dir.display()
    );
    println!("{}", dir.display());
    Ok(())
}

fn load_splits(cfg: &ExperimentConfig, data: Option<&Path>) -> Result<Splits, CliError> {
    match data {
        Some(dir) => {
            let (manifest, splits) = read_dataset(dir)?;
            if manifest.spec.kind != cfg.dataset.kind {
                return Err(CliError::Validation(format!(
                    "dataset in {} is {:?}, config expects {:?}",
                    dir.display(),
                    manifest.spec.kind,
                    cfg.dataset.kind
                )));
            }
            Ok(splits)
        }
        None => cfg.splits().map_err(experiment_error),
    }
}

pub fn train(config: Option<&Path>, data: Option<&Path>, flags: &ExperimentFlags) -> Result<(), CliError> {
    let cfg = load_experiment(config, flags)?;
    let splits = load_splits(&cfg, data)?;
    let dir = out_dir(&cfg);
    std::fs::create_dir_all(&dir)?;
    let hash = cfg.hash();
    let history_path = dir.join(format!("history-{hash}.jsonl"));
    let mut history = std::fs::File::create(&history_path)?;
    let mut write_err = None;
    let outcome = run_on_splits(&cfg, &splits, |rec| {
        let line = serde_json::to_string(&json!({ "config_hash": hash, "epoch": rec })).expect("serializable");
        if let Err(e) = writeln!(history, "{line}").and_then(|_| history.flush()) {
            write_err.get_or_insert(e);
        }
    });
    if let Some(e) = write_err {
        return Err(e.into());
    }
    let outcome = outcome.map_err(experiment_error)?;
    let model_path = dir.join(format!("model-{hash}.bin"));
    save_model(&model_path, &outcome.model)?;
    let name = metric_name(cfg.task_kind());
    let mut metrics = json!({
        "config_hash": hash,
        "task": cfg.task_kind(),
        "metric": name,
        "test_loss": outcome.test_loss,
        "nfe_mean": outcome.test_nfe,
        "val_metric": outcome.val_metric,
        "best_epoch": outcome.best_epoch,
        "epochs": outcome.history.len(),
        "config": cfg,
    });
    metrics[name] = json!(outcome.test_metric);
    let metrics_path = dir.join(format!("metrics-{hash}.json"));
    std::fs::write(&metrics_path, serde_json::to_vec_pretty(&metrics)?)?;
    println!("{}", metrics_path.display());
    Ok(())
}

pub struct AttackArgs {
    pub model: PathBuf,
    pub config: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub kind: String,
    pub fractions: Vec<f64>,
    pub attack_seeds: u64,
    pub svg: bool,
}

pub fn attack(args: &AttackArgs, flags: &ExperimentFlags) -> Result<(), CliError> {
    let kind: AttackKind = serde_json::from_value(json!(args.kind))
        .map_err(|_| CliError::Validation(format!("unknown attack `{}`; expected drop or change", args.kind)))?;
    if args.fractions.is_empty() || args.fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(CliError::Validation("fractions must lie in [0, 1]".into()));
    }
    if args.attack_seeds == 0 {
        return Err(CliError::Validation("attack_seeds must be at least 1".into()));
    }
    let cfg = load_experiment(args.config.as_deref(), flags)?;
    let model = load_model(&args.model)?;
    if model.task() != cfg.task_kind() {
        return Err(CliError::Validation(format!(
            "model task {:?} does not match dataset task {:?}",
            model.task(),
            cfg.task_kind()
        )));
    }
    if model.task() == TaskKind::Forecast {
        return Err(CliError::Validation("attacks apply to regression and classification tasks".into()));
    }
    let splits = load_splits(&cfg, args.data.as_deref())?;
    let seeds: Vec<u64> = (0..args.attack_seeds).collect();
    let curve = attack_curve(&model, &splits.test, kind, &args.fractions, &seeds).map_err(|e| CliError::Io(e.to_string()))?;
    let clean = evaluate(&model, &splits.test).map_err(|e| CliError::Io(e.to_string()))?.metric;
    let key = json!({ "model": file_sha256(&args.model)?, "kind": kind, "fractions": args.fractions, "seeds": seeds, "config": cfg.hash() });
    let hash = sha256_hex(key.to_string().as_bytes())[..16].to_string();
    let dir = out_dir(&cfg);
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(format!("attack-{}-{hash}.csv", args.kind));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["fraction", "mean", "std", "seeds"])?;
    for p in &curve {
        w.write_record([p.fraction.to_string(), p.mean.to_string(), p.std.to_string(), p.seeds.to_string()])?;
    }
    w.flush()?;
    log::info!("clean {} = {clean:.4}", metric_name(model.task()));
    if args.svg {
        let pts: Vec<(f64, f64)> = curve.iter().map(|p| (p.fraction, p.mean)).collect();
        let chart = svg::line_chart(&format!("{} attack", args.kind), "fraction", metric_name(model.task()), &[("mean", &pts)]);
        std::fs::write(dir.join(format!("attack-{}-{hash}.svg", args.kind)), chart)?;
    }
    println!("{}", path.display());
    Ok(())
}

pub struct VerifyArgs {
    pub study: String,
    pub config: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
    pub iterations: Option<usize>,
    pub set: Vec<(String, serde_json::Value)>,
    pub print_defaults: bool,
}

pub fn verify(args: &VerifyArgs) -> Result<(), CliError> {
    let name: StudyName = args.study.parse().map_err(|e: denots_lab::studies::RunError| CliError::Validation(e.to_string()))?;
    if args.print_defaults {
        println!("{}", serde_json::to_string_pretty(&name.default_config())?);
        return Ok(());
    }
    let mut overrides = match &args.config {
        Some(p) => read_json(p)?,
        None => json!({}),
    };
    if let Some(n) = args.iterations {
        set_path(&mut overrides, "iterations", json!(n));
    }
    for (k, v) in &args.set {
        set_path(&mut overrides, k, v.clone());
    }
    let mut merged = name.default_config();
    denots_lab::studies::merge_json(&mut merged, overrides.clone());
    name.check_config(&merged).map_err(|e| CliError::Validation(e.to_string()))?;
    let outcome = run_study(name, overrides, args.seed, &args.out).map_err(|e| {
        if e.is_numerical() {
            CliError::Divergence(e.to_string())
        } else {
            CliError::Io(e.to_string())
        }
    })?;
    println!("{}", outcome.files.json.display());
    println!("{name}: {}", if outcome.passed { "PASS" } else { "FAIL" });
    if outcome.passed {
        Ok(())
    } else {
        Err(CliError::StudyFailed(name.to_string()))
    }
}
