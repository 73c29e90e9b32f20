//! On-disk formats: dataset CSV splits with a JSON manifest, and a binary
//! weights container.
//!
//! Dataset CSV has header `t,x_1..x_u,target` (or `target_1..target_u` for
//! forecasting). Every sequence starts at `t = 0`; a row whose timestamp does
//! not increase starts the next sequence. Missing values are written as `NaN`.

use crate::datagen::{DatasetSpec, Splits};
use crate::dynamics::{DynamicsError, VectorField};
use crate::model::{Sncde, SncdeConfig, Standardizer, TargetScaling, TaskKind};
use crate::series::{SeriesError, Target, TimeSeries};
use crate::tensor::{ParamSet, Tensor, TensorError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Fs { path: PathBuf, source: std::io::Error },
    #[error("csv error in {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

fn fs_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Fs { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv { path: path.to_path_buf(), source }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String, IoError> {
    Ok(sha256_hex(&fs::read(path).map_err(fs_err(path))?))
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v}")
    }
}

pub fn write_series_csv(path: &Path, task: TaskKind, set: &[TimeSeries]) -> Result<(), IoError> {
    let u = set.first().map_or(0, TimeSeries::channels);
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=u).map(|c| format!("x_{c}")));
    if task == TaskKind::Forecast {
        header.extend((1..=u).map(|c| format!("target_{c}")));
    } else {
        header.push("target".into());
    }
    w.write_record(&header).map_err(csv_err(path))?;
    for s in set {
        for (&t, row) in s.times().iter().zip(s.features()) {
            let mut rec: Vec<String> = vec![fmt(t)];
            rec.extend(row.iter().map(|&v| fmt(v)));
            match &s.target {
                Target::Regression(y) => rec.push(fmt(*y)),
                Target::Class(c) => rec.push(c.to_string()),
                Target::Forecast { times, values } => {
                    let hit = times.iter().position(|&q| q == t);
                    match hit {
                        Some(j) => rec.extend(values[j].iter().map(|&v| fmt(v))),
                        None => rec.extend(std::iter::repeat_n("NaN".to_string(), u)),
                    }
                }
            }
            w.write_record(&rec).map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(fs_err(path))?;
    Ok(())
}

pub fn read_series_csv(path: &Path, task: TaskKind) -> Result<Vec<TimeSeries>, IoError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    let u = header.iter().filter(|h| h.starts_with("x_")).count();
    let n_target = header.len() - 1 - u;
    let bad = |message: String| IoError::Format { path: path.to_path_buf(), message };
    if task == TaskKind::Forecast && n_target != u || task != TaskKind::Forecast && n_target != 1 {
        return Err(bad(format!("unexpected target columns for {task:?}")));
    }

    struct Acc {
        times: Vec<f64>,
        feats: Vec<Vec<f64>>,
        targets: Vec<Vec<f64>>,
    }
    let mut groups: Vec<Acc> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|e| bad(format!("row {}: {e}", line + 2))))
            .collect::<Result<_, _>>()?;
        let t = vals[0];
        let new_seq = groups.last().is_none_or(|g| t <= *g.times.last().expect("non-empty"));
        if new_seq {
            groups.push(Acc { times: Vec::new(), feats: Vec::new(), targets: Vec::new() });
        }
        let g = groups.last_mut().expect("pushed");
        g.times.push(t);
        g.feats.push(vals[1..=u].to_vec());
        g.targets.push(vals[1 + u..].to_vec());
    }
    groups
        .into_iter()
        .map(|g| {
            let target = match task {
                TaskKind::Regression => Target::Regression(g.targets[0][0]),
                TaskKind::Binary | TaskKind::Multiclass => Target::Class(g.targets[0][0] as usize),
                TaskKind::Forecast => {
                    let mut times = Vec::new();
                    let mut values = Vec::new();
                    for (t, row) in g.times.iter().zip(&g.targets) {
                        if row.iter().any(|v| !v.is_nan()) {
                            times.push(*t);
                            values.push(row.clone());
                        }
                    }
                    Target::Forecast { times, values }
                }
            };
            Ok(TimeSeries::new(g.times, g.feats, target)?)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub file: String,
    pub sequences: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: DatasetSpec,
    pub seed: u64,
    pub task: TaskKind,
    pub channels: usize,
    pub config_hash: String,
    pub train: SplitEntry,
    pub val: SplitEntry,
    pub test: SplitEntry,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes `train.csv`, `val.csv`, `test.csv` and `manifest.json` into `dir`.
pub fn write_dataset(
    dir: &Path,
    spec: &DatasetSpec,
    seed: u64,
    config_hash: &str,
    splits: &Splits,
) -> Result<Manifest, IoError> {
    fs::create_dir_all(dir).map_err(fs_err(dir))?;
    let task = spec.kind.task();
    let entry = |name: &str, set: &[TimeSeries]| -> Result<SplitEntry, IoError> {
        let file = format!("{name}.csv");
        let path = dir.join(&file);
        write_series_csv(&path, task, set)?;
        Ok(SplitEntry { file, sequences: set.len(), sha256: file_sha256(&path)? })
    };
    let manifest = Manifest {
        spec: spec.clone(),
        seed,
        task,
        channels: spec.kind.channels(),
        config_hash: config_hash.to_string(),
        train: entry("train", &splits.train)?,
        val: entry("val", &splits.val)?,
        test: entry("test", &splits.test)?,
    };
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(fs_err(&path))?;
    Ok(manifest)
}

/// Reads a dataset directory, verifying checksums against the manifest.
pub fn read_dataset(dir: &Path) -> Result<(Manifest, Splits), IoError> {
    let mpath = dir.join(MANIFEST_FILE);
    let manifest: Manifest = serde_json::from_slice(&fs::read(&mpath).map_err(fs_err(&mpath))?)?;
    let load = |e: &SplitEntry| -> Result<Vec<TimeSeries>, IoError> {
        let path = dir.join(&e.file);
        let sum = file_sha256(&path)?;
        if sum != e.sha256 {
            return Err(IoError::Format { path, message: "checksum does not match manifest".into() });
        }
        read_series_csv(&path, manifest.task)
    };
    let splits = Splits { train: load(&manifest.train)?, val: load(&manifest.val)?, test: load(&manifest.test)? };
    Ok((manifest, splits))
}

const MAGIC: &[u8; 8] = b"DNOTSWGT";
const VERSION: u32 = 1;

/// Serializes named tensors plus a JSON metadata blob:
/// magic, version, metadata, shape table, little-endian f64 data, SHA-256 of all preceding bytes.
pub fn encode_weights(metadata: &str, params: &ParamSet) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(metadata.len() as u64).to_le_bytes());
    buf.extend_from_slice(metadata.as_bytes());
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params.iter() {
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(t.shape().len() as u8);
        for &d in t.shape() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
    }
    for (_, t) in params.iter() {
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.bytes.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(s)
    }
    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }
    fn u16(&mut self) -> Option<u16> {
        self.take(2).map(|b| u16::from_le_bytes(b.try_into().expect("2 bytes")))
    }
    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }
}

pub fn decode_weights(bytes: &[u8], path: &Path) -> Result<(String, ParamSet), IoError> {
    let bad = |m: &str| IoError::Format { path: path.to_path_buf(), message: m.to_string() };
    if bytes.len() < MAGIC.len() + 32 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(bad("not a weights file (bad magic)"));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(bad("checksum mismatch"));
    }
    let mut c = Cursor { bytes: body, pos: MAGIC.len() };
    let truncated = || bad("truncated weights file");
    let version = c.u32().ok_or_else(truncated)?;
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let meta_len = c.u64().ok_or_else(truncated)? as usize;
    let metadata = String::from_utf8(c.take(meta_len).ok_or_else(truncated)?.to_vec())
        .map_err(|_| bad("metadata is not UTF-8"))?;
    let count = c.u32().ok_or_else(truncated)? as usize;
    let mut table = Vec::with_capacity(count);
    for _ in 0..count {
        let nlen = c.u16().ok_or_else(truncated)? as usize;
        let name = String::from_utf8(c.take(nlen).ok_or_else(truncated)?.to_vec()).map_err(|_| bad("bad name"))?;
        let ndim = c.u8().ok_or_else(truncated)? as usize;
        let shape: Vec<usize> = (0..ndim).map(|_| c.u64().map(|d| d as usize)).collect::<Option<_>>().ok_or_else(truncated)?;
        table.push((name, shape));
    }
    let mut params = ParamSet::new();
    for (name, shape) in table {
        let n: usize = shape.iter().product();
        let raw = c.take(n * 8).ok_or_else(truncated)?;
        let data = raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
        params.insert(name, Tensor::new(&shape, data)?);
    }
    if c.pos != body.len() {
        return Err(bad("trailing bytes"));
    }
    Ok((metadata, params))
}

pub fn write_weights(path: &Path, metadata: &str, params: &ParamSet) -> Result<(), IoError> {
    let mut f = fs::File::create(path).map_err(fs_err(path))?;
    f.write_all(&encode_weights(metadata, params)).map_err(fs_err(path))
}

pub fn read_weights(path: &Path) -> Result<(String, ParamSet), IoError> {
    let mut bytes = Vec::new();
    fs::File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(fs_err(path))?;
    decode_weights(&bytes, path)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ModelMetadata {
    config: SncdeConfig,
    input_dim: usize,
    input_norm: Standardizer,
    target_scaling: TargetScaling,
    normalizer: f64,
}

pub fn save_model(path: &Path, model: &Sncde) -> Result<(), IoError> {
    let meta = ModelMetadata {
        config: model.config.clone(),
        input_dim: model.field.input_dim(),
        input_norm: model.input_norm.clone(),
        target_scaling: model.target_scaling,
        normalizer: model.normalizer,
    };
    let mut params = model.field.params().clone();
    for (name, t) in model.head.iter() {
        params.insert(name, t.clone());
    }
    write_weights(path, &serde_json::to_string(&meta)?, &params)
}

pub fn load_model(path: &Path) -> Result<Sncde, IoError> {
    let (meta, params) = read_weights(path)?;
    let meta: ModelMetadata = serde_json::from_str(&meta)?;
    let field = VectorField::from_params(meta.config.field, meta.input_dim, meta.config.hidden_dim, params.clone())?;
    let mut head = ParamSet::new();
    for name in ["head_w", "head_b"] {
        head.insert(name, params.get(name)?.clone());
    }
    Ok(Sncde {
        config: meta.config,
        field,
        head,
        input_norm: meta.input_norm,
        target_scaling: meta.target_scaling,
        normalizer: meta.normalizer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{build, DatasetKind};

    #[test]
    fn dataset_round_trip_for_every_kind() {
        let dir = tempfile::tempdir().unwrap();
        for kind in [DatasetKind::Bump, DatasetKind::SineMix, DatasetKind::Sine2, DatasetKind::Pendulum] {
            let mut spec = DatasetSpec::new(kind, 30);
            spec.missing_fraction = if kind == DatasetKind::Pendulum { 0.2 } else { 0.0 };
            spec.length = Some((20, 30));
            let splits = build(&spec, 3).unwrap();
            let sub = dir.path().join(format!("{kind:?}"));
            let m = write_dataset(&sub, &spec, 3, "abc", &splits).unwrap();
            assert_eq!(m.train.sequences, splits.train.len());
            let (_, back) = read_dataset(&sub).unwrap();
            assert_eq!(back.train.len(), splits.train.len());
            for (a, b) in back.test.iter().zip(&splits.test) {
                assert_eq!(a.times(), b.times());
                assert_eq!(a.target, b.target);
                for (ra, rb) in a.features().iter().zip(b.features()) {
                    for (x, y) in ra.iter().zip(rb) {
                        assert!(x == y || (x.is_nan() && y.is_nan()));
                    }
                }
            }
            let again = write_dataset(&sub, &spec, 3, "abc", &build(&spec, 3).unwrap()).unwrap();
            assert_eq!(again, m);
        }
    }

    #[test]
    fn corrupted_csv_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let spec = DatasetSpec::new(DatasetKind::Bump, 30);
        write_dataset(dir.path(), &spec, 1, "h", &build(&spec, 1).unwrap()).unwrap();
        let p = dir.path().join("val.csv");
        let mut text = fs::read_to_string(&p).unwrap();
        text.push_str("0,1,0\n");
        fs::write(&p, text).unwrap();
        assert!(read_dataset(dir.path()).is_err());
    }

    #[test]
    fn model_round_trip_predicts_identically() {
        use crate::model::SequenceModel;
        use crate::rng::substream;
        let spec = DatasetSpec::new(DatasetKind::SineMix, 30);
        let splits = build(&spec, 5).unwrap();
        let cfg = SncdeConfig { hidden_dim: 4, scale: 2.0, ..SncdeConfig::default() };
        let mut m = Sncde::new(cfg, 1, &mut substream(5, "init"));
        m.fit_preprocessing(&splits.train);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&path, &m).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.predict(&splits.test[0]).unwrap(), m.predict(&splits.test[0]).unwrap());
    }

    #[test]
    fn weights_round_trip_and_checksum() {
        let mut p = ParamSet::new();
        p.insert("w", Tensor::matrix(2, 3, vec![1.0, -2.0, 3.5, 0.0, 1e-300, f64::MAX]).unwrap());
        p.insert("b", Tensor::vector(vec![0.25, -0.5]));
        let bytes = encode_weights("{\"k\":1}", &p);
        let (meta, q) = decode_weights(&bytes, Path::new("mem")).unwrap();
        assert_eq!(meta, "{\"k\":1}");
        assert_eq!(p, q);
        let mut broken = bytes.clone();
        broken[30] ^= 1;
        assert!(decode_weights(&broken, Path::new("mem")).is_err());
        assert!(decode_weights(b"nonsense", Path::new("mem")).is_err());
    }
}
