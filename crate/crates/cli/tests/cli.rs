use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn denots(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_denots"))
        .args(args)
        .current_dir(dir)
        .env("DENOTS_LOG", "info")
        .env("DENOTS_WORKERS", "2")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout_path(out: &Output) -> PathBuf {
    PathBuf::from(String::from_utf8_lossy(&out.stdout).lines().next().expect("path on stdout").trim())
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, cfg.to_string()).unwrap();
    path.to_string_lossy().into_owned()
}

fn bump_config(dir: &Path) -> String {
    let cfg = serde_json::json!({
        "dataset": {"kind": "bump", "n_sequences": 40, "length": [20, 20]},
        "field": "anti-nf",
        "hidden_dim": 4,
        "scale": 5.0,
        "training": {"max_epochs": 2},
        "out": dir.join("runs").to_string_lossy(),
    });
    write_config(dir, "bump.json", &cfg)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn checksums(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn generate_writes_three_splits_and_manifest_reproducibly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = bump_config(tmp.path());
    let out = denots(tmp.path(), &["generate", "--config", &cfg]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let data = stdout_path(&out);
    let csvs = std::fs::read_dir(&data).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv")).count();
    assert_eq!(csvs, 3);
    let first = checksums(&data);
    assert!(first.iter().any(|(n, _)| n.ends_with(".json")));

    std::fs::remove_dir_all(&data).unwrap();
    let again = denots(tmp.path(), &["generate", "--config", &cfg]);
    assert_eq!(code(&again), 0);
    assert_eq!(checksums(&stdout_path(&again)), first);
}

#[test]
fn missing_dataset_kind_is_a_validation_error_naming_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", &serde_json::json!({"dataset": {"n_sequences": 30}}));
    let out = denots(tmp.path(), &["generate", "--config", &cfg]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("kind"));
}

#[test]
fn train_reports_auroc_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = bump_config(tmp.path());
    let a = denots(tmp.path(), &["train", "--config", &cfg, "--seed", "1"]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let path = stdout_path(&a);
    let first = std::fs::read(&path).unwrap();
    let metrics = read_json(&path);
    assert!(metrics["auroc"].is_f64());
    assert!(metrics["nfe_mean"].as_f64().unwrap() > 0.0);
    let hash = metrics["config_hash"].as_str().unwrap().to_string();
    let runs = path.parent().unwrap();
    assert!(runs.join(format!("model-{hash}.bin")).exists());
    let history = std::fs::read_to_string(runs.join(format!("history-{hash}.jsonl"))).unwrap();
    assert_eq!(history.lines().count(), metrics["epochs"].as_u64().unwrap() as usize);

    let b = denots(tmp.path(), &["train", "--config", &cfg, "--seed", "1"]);
    assert_eq!(code(&b), 0);
    assert_eq!(std::fs::read(stdout_path(&b)).unwrap(), first);
}

#[test]
fn larger_time_scale_costs_more_evaluations() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = bump_config(tmp.path());
    let nfe = |scale: &str| {
        let out = denots(tmp.path(), &["train", "--config", &cfg, "--scale", scale]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        read_json(&stdout_path(&out))["nfe_mean"].as_f64().unwrap()
    };
    let (small, large) = (nfe("1"), nfe("10"));
    assert!(large > small, "D=10 nfe {large} vs D=1 nfe {small}");
}

#[test]
fn attack_grid_rows_clean_identity_and_spread() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = bump_config(tmp.path());
    let trained = denots(tmp.path(), &["train", "--config", &cfg]);
    assert_eq!(code(&trained), 0);
    let metrics = read_json(&stdout_path(&trained));
    let model = stdout_path(&trained).parent().unwrap().join(format!("model-{}.bin", metrics["config_hash"].as_str().unwrap()));
    let model = model.to_string_lossy();

    let drop = denots(tmp.path(), &["attack", "--model", &model, "--config", &cfg, "--kind", "drop", "--fractions", "0,0.25,0.5,0.85"]);
    assert_eq!(code(&drop), 0, "{}", String::from_utf8_lossy(&drop.stderr));
    let mut rdr = csv::Reader::from_path(stdout_path(&drop)).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    let clean: f64 = rows[0][1].parse().unwrap();
    assert_eq!(clean, metrics["auroc"].as_f64().unwrap());
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 0.0);

    let change = denots(
        tmp.path(),
        &["attack", "--model", &model, "--config", &cfg, "--kind", "change", "--fractions", "0,0.1,0.2,0.4,0.8", "--attack-seeds", "5"],
    );
    assert_eq!(code(&change), 0);
    let mut rdr = csv::Reader::from_path(stdout_path(&change)).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), ["fraction", "mean", "std", "seeds"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r[2].parse::<f64>().unwrap().is_finite() && &r[3] == "5"));
    assert!(rows[1..].iter().any(|r| r[2].parse::<f64>().unwrap() > 0.0));
}

#[test]
fn attack_rejects_unknown_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = bump_config(tmp.path());
    let out = denots(tmp.path(), &["attack", "--model", "missing.bin", "--config", &cfg, "--kind", "shuffle"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn solver_step_exhaustion_exits_with_divergence_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = bump_config(tmp.path());
    let out = denots(tmp.path(), &["train", "--config", &cfg, "--set", "solver.max_steps=1"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn verify_unknown_study_lists_available_ones() {
    let tmp = tempfile::tempdir().unwrap();
    let out = denots(tmp.path(), &["verify", "bogus"]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    for name in ["iss", "forgetting", "spline-error", "assumption-mc", "robustness", "nfe-sweep", "norm-study", "sinemix-bench", "l2-vs-scale"] {
        assert!(err.contains(name), "{name} missing from: {err}");
    }
}

#[test]
fn verify_spline_error_reports_theory_constant() {
    let tmp = tempfile::tempdir().unwrap();
    let out = denots(
        tmp.path(),
        &["verify", "spline-error", "--out", "o", "--set", "mc.n_paths=4", "--set", "mc.features=256", "--set", "deltas=[1.0]"],
    );
    assert!(matches!(code(&out), 0 | 3), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = read_json(&tmp.path().join(stdout_path(&out)));
    let constant = summary["report"]["estimates"][0]["theory_constant"].as_f64().unwrap();
    assert!((constant - 10.7119).abs() < 1e-3);
}

#[test]
fn verify_exit_code_reflects_study_assertions() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = denots(tmp.path(), &["verify", "robustness", "--out", "o", "--set", "cases=3"]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    let csv = stdout_path(&ok).with_extension("csv");
    assert!(tmp.path().join(csv).exists());
    let failing = denots(tmp.path(), &["verify", "robustness", "--out", "o", "--set", "cases=3", "--set", "tightness_t=1"]);
    assert_eq!(code(&failing), 3);
    let bad = denots(tmp.path(), &["verify", "robustness", "--set", "cases=\"many\""]);
    assert_eq!(code(&bad), 1);
}

#[test]
fn verify_assumption_mc_thousand_iterations_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let out = denots(tmp.path(), &["verify", "assumption-mc", "--iterations", "1000", "--out", "o"]);
    println!("{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(code(&out), 0);
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[test]
fn sweep_rows_correlation_and_resume() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = bump_config(tmp.path());
    let out = denots(tmp.path(), &["sweep", "--config", &cfg, "--axis", "scale", "--grid", "1,2,5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json_path = stdout_path(&out);
    let summary = read_json(&json_path);
    let csv_path = json_path.with_extension("csv");
    let mut rdr = csv::Reader::from_path(&csv_path).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    let log_nfe: Vec<f64> = rows.iter().map(|r| r[2].parse::<f64>().unwrap().ln()).collect();
    let metric: Vec<f64> = rows.iter().map(|r| r[3].parse::<f64>().unwrap()).collect();
    let p = summary["pearson"].as_f64().expect("pearson in summary");
    assert!((p - pearson(&log_nfe, &metric)).abs() < 1e-9);
    let first_rows = std::fs::read(&csv_path).unwrap();

    // Forget one completed point, as if the run had been interrupted.
    let manifest_path = json_path.with_extension("manifest.json");
    let mut manifest = read_json(&manifest_path);
    manifest["completed"].as_array_mut().unwrap().pop();
    std::fs::write(&manifest_path, manifest.to_string()).unwrap();
    let resumed = denots(tmp.path(), &["sweep", "--config", &cfg, "--axis", "scale", "--grid", "1,2,5"]);
    assert_eq!(code(&resumed), 0);
    assert!(String::from_utf8_lossy(&resumed.stderr).contains("1 of 3 points pending"));
    assert_eq!(std::fs::read(&csv_path).unwrap(), first_rows);
}
