//! Layered configuration: flags over file over defaults.

use crate::error::CliError;
use denots_core::experiment::ExperimentConfig;
use denots_lab::studies::merge_json;
use serde_json::{json, Map, Value};
use std::path::Path;

pub fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Sets `value` at a dotted `path`, creating intermediate objects.
pub fn set_path(root: &mut Value, path: &str, value: Value) {
    let mut patch = value;
    for key in path.rsplit('.') {
        let mut m = Map::new();
        m.insert(key.to_string(), patch);
        patch = Value::Object(m);
    }
    merge_json(root, patch);
}

/// Parses `key=value`; the value is read as JSON and falls back to a string.
pub fn parse_assignment(s: &str) -> Result<(String, Value), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.to_string(), value))
}

/// Experiment-level flag overrides.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct ExperimentFlags {
    /// Root seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<String>,
    /// Time scale D.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Vector field: no-nf, sync-nf, anti-nf, mlp-tanh, mlp-relu.
    #[arg(long)]
    pub field: Option<String>,
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Sets both rtol and atol.
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Dataset size.
    #[arg(long)]
    pub sequences: Option<usize>,
    /// Arbitrary override `dotted.key=json`, repeatable.
    #[arg(long = "set", value_parser = parse_assignment)]
    pub set: Vec<(String, Value)>,
}

impl ExperimentFlags {
    pub fn apply(&self, v: &mut Value) {
        let mut put = |path: &str, value: Value| set_path(v, path, value);
        if let Some(x) = self.seed {
            put("seed", json!(x));
        }
        if let Some(x) = &self.out {
            put("out", json!(x));
        }
        if let Some(x) = self.scale {
            put("scale", json!(x));
        }
        if let Some(x) = &self.field {
            put("field", json!(x));
        }
        if let Some(x) = self.hidden {
            put("hidden_dim", json!(x));
        }
        if let Some(x) = self.tolerance {
            put("solver.rtol", json!(x));
            put("solver.atol", json!(x));
        }
        if let Some(x) = self.lr {
            put("training.lr", json!(x));
        }
        if let Some(x) = self.patience {
            put("training.patience", json!(x));
        }
        if let Some(x) = self.max_epochs {
            put("training.max_epochs", json!(x));
        }
        if let Some(x) = self.batch_size {
            put("training.batch_size", json!(x));
        }
        if let Some(x) = self.sequences {
            put("dataset.n_sequences", json!(x));
        }
        for (k, x) in &self.set {
            put(k, x.clone());
        }
    }
}

/// Reads the config file, applies flags and validates.
pub fn load_experiment(path: Option<&Path>, flags: &ExperimentFlags) -> Result<ExperimentConfig, CliError> {
    let mut v = match path {
        Some(p) => read_json(p)?,
        None => json!({}),
    };
    flags.apply(&mut v);
    let cfg: ExperimentConfig = serde_json::from_value(v).map_err(|e| CliError::Validation(format!("config: {e}")))?;
    cfg.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(cfg)
}

pub fn out_dir(cfg: &ExperimentConfig) -> std::path::PathBuf {
    std::path::PathBuf::from(cfg.out.clone().unwrap_or_else(|| "runs".to_string()))
}
