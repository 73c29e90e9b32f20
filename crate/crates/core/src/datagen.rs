//! Synthetic datasets, adversarial perturbations and seeded splits.

use crate::model::TaskKind;
use crate::rng::{indexed_substream, substream, StreamRng};
use crate::series::{SeriesError, Target, TimeSeries};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatagenError {
    #[error("invalid dataset spec: `{field}` {message}")]
    InvalidSpec { field: &'static str, message: String },
    #[error("split fractions must be non-negative and sum to 1, got {0:?}")]
    BadFractions(Vec<f64>),
    #[error("split `{0}` would be empty")]
    EmptySplit(&'static str),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    Bump,
    SineMix,
    Sine2,
    Pendulum,
}

impl DatasetKind {
    pub fn task(self) -> TaskKind {
        match self {
            DatasetKind::Bump => TaskKind::Binary,
            DatasetKind::SineMix | DatasetKind::Pendulum => TaskKind::Regression,
            DatasetKind::Sine2 => TaskKind::Forecast,
        }
    }

    pub fn channels(self) -> usize {
        match self {
            DatasetKind::Pendulum => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Irregularity {
    /// Evenly spaced timestamps.
    Uniform,
    /// Exponential inter-arrival gaps.
    Poisson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    #[serde(default = "default_sequences")]
    pub n_sequences: usize,
    /// Inclusive range of observations per sequence.
    #[serde(default)]
    pub length: Option<(usize, usize)>,
    #[serde(default)]
    pub irregularity: Option<Irregularity>,
    #[serde(default)]
    pub missing_fraction: f64,
    #[serde(default)]
    pub noise: f64,
    /// Observation window; defaults to 1 for sine and bump data and 20 for the pendulum.
    #[serde(default)]
    pub window: Option<f64>,
    /// Sine frequency range in cycles per window.
    #[serde(default = "default_freq")]
    pub frequency: (f64, f64),
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    /// Keep only this many training sequences after splitting.
    #[serde(default)]
    pub train_limit: Option<usize>,
    #[serde(default = "default_fractions")]
    pub fractions: (f64, f64, f64),
}

fn default_sequences() -> usize {
    1000
}
fn default_freq() -> (f64, f64) {
    (1.0, 5.0)
}
fn default_zeta() -> f64 {
    20.0
}
fn default_fractions() -> (f64, f64, f64) {
    (0.8, 0.1, 0.1)
}

impl DatasetSpec {
    pub fn new(kind: DatasetKind, n_sequences: usize) -> Self {
        Self {
            kind,
            n_sequences,
            length: None,
            irregularity: None,
            missing_fraction: 0.0,
            noise: 0.0,
            window: None,
            frequency: default_freq(),
            zeta: default_zeta(),
            train_limit: None,
            fractions: default_fractions(),
        }
    }

    pub fn length_range(&self) -> (usize, usize) {
        self.length.unwrap_or(match self.kind {
            DatasetKind::Pendulum => (200, 400),
            _ => (100, 100),
        })
    }

    pub fn irregularity_mode(&self) -> Irregularity {
        self.irregularity.unwrap_or(match self.kind {
            DatasetKind::Pendulum => Irregularity::Poisson,
            _ => Irregularity::Uniform,
        })
    }

    pub fn window_length(&self) -> f64 {
        self.window.unwrap_or(match self.kind {
            DatasetKind::Pendulum => 20.0,
            _ => 1.0,
        })
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        let bad = |field, message: &str| Err(DatagenError::InvalidSpec { field, message: message.to_string() });
        if self.n_sequences == 0 {
            return bad("n_sequences", "must be positive");
        }
        let (lo, hi) = self.length_range();
        if lo < 2 || hi < lo {
            return bad("length", "must satisfy 2 <= min <= max");
        }
        if self.kind == DatasetKind::Sine2 && lo < 4 {
            return bad("length", "needs at least 4 points for forecasting");
        }
        if !(0.0..=1.0).contains(&self.missing_fraction) {
            return bad("missing_fraction", "must lie in [0, 1]");
        }
        if !(self.noise >= 0.0) {
            return bad("noise", "must be non-negative");
        }
        if !(self.window_length() > 0.0) {
            return bad("window", "must be positive");
        }
        if !(self.frequency.0 > 0.0 && self.frequency.1 >= self.frequency.0) {
            return bad("frequency", "must satisfy 0 < min <= max");
        }
        if !(self.zeta > 0.0) {
            return bad("zeta", "must be positive");
        }
        let f = [self.fractions.0, self.fractions.1, self.fractions.2];
        if f.iter().any(|&x| x < 0.0) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(DatagenError::BadFractions(f.to_vec()));
        }
        Ok(())
    }
}

/// Bump function `exp(1 / ((ζx)² − 1))` on `|ζx| < 1`, zero elsewhere.
pub fn bump(zeta: f64, x: f64) -> f64 {
    let s = zeta * x;
    if s.abs() < 1.0 {
        (1.0 / (s * s - 1.0)).exp()
    } else {
        0.0
    }
}

fn timestamps(rng: &mut StreamRng, n: usize, window: f64, mode: Irregularity) -> Vec<f64> {
    match mode {
        Irregularity::Uniform => (0..n).map(|k| window * k as f64 / (n - 1) as f64).collect(),
        Irregularity::Poisson => {
            // Exponential gaps with mean window/(n−1), so lengths match the uniform case.
            let gaps = Exp::new((n - 1) as f64 / window).expect("positive rate");
            let mut t = vec![0.0];
            for _ in 1..n {
                let last = *t.last().expect("non-empty");
                let g: f64 = gaps.sample(rng);
                t.push((last + g).max(last.next_up()));
            }
            t
        }
    }
}

fn draw_length(rng: &mut StreamRng, range: (usize, usize)) -> usize {
    rng.random_range(range.0..=range.1)
}

/// Marks `round(p·n·u)` feature entries missing, chosen uniformly.
fn inject_missing(rng: &mut StreamRng, features: &mut [Vec<f64>], p: f64) {
    if p <= 0.0 {
        return;
    }
    let u = features.first().map_or(0, Vec::len);
    let total = features.len() * u;
    let k = ((p * total as f64).round() as usize).min(total);
    for flat in index::sample(rng, total, k) {
        features[flat / u][flat % u] = f64::NAN;
    }
}

fn add_noise(rng: &mut StreamRng, features: &mut [Vec<f64>], noise: f64) {
    if noise > 0.0 {
        for row in features {
            for v in row.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *v += noise * z;
            }
        }
    }
}

pub fn gen_bump(spec: &DatasetSpec, seed: u64) -> Result<Vec<TimeSeries>, DatagenError> {
    spec.validate()?;
    let window = spec.window_length();
    let half_width = window / spec.zeta;
    (0..spec.n_sequences)
        .map(|i| {
            let mut rng = indexed_substream(seed, "dataset/bump", i as u64);
            let n = draw_length(&mut rng, spec.length_range());
            let times = timestamps(&mut rng, n, window, spec.irregularity_mode());
            let positive = i % 2 == 0;
            let center = rng.random_range(half_width..=(window - half_width));
            let mut features: Vec<Vec<f64>> = times
                .iter()
                .map(|&t| vec![if positive { bump(spec.zeta / window, t - center) } else { 0.0 }])
                .collect();
            add_noise(&mut rng, &mut features, spec.noise);
            inject_missing(&mut rng, &mut features, spec.missing_fraction);
            Ok(TimeSeries::new(times, features, Target::Class(usize::from(positive)))?)
        })
        .collect()
}

/// Two sine segments joined at the window midpoint with matching value; the
/// second segment starts from the phase the first one reached.
pub fn sinemix_signal(t: f64, window: f64, amp: f64, f1: f64, f2: f64, phase: f64) -> f64 {
    let mid = 0.5 * window;
    if t <= mid {
        amp * (2.0 * PI * f1 * t / window + phase).sin()
    } else {
        let joined = 2.0 * PI * f1 * mid / window + phase;
        amp * (2.0 * PI * f2 * (t - mid) / window + joined).sin()
    }
}

pub fn gen_sinemix(spec: &DatasetSpec, seed: u64) -> Result<Vec<TimeSeries>, DatagenError> {
    spec.validate()?;
    let window = spec.window_length();
    (0..spec.n_sequences)
        .map(|i| {
            let mut rng = indexed_substream(seed, "dataset/sinemix", i as u64);
            let n = draw_length(&mut rng, spec.length_range());
            let times = timestamps(&mut rng, n, window, spec.irregularity_mode());
            let (lo, hi) = spec.frequency;
            let f1 = rng.random_range(lo..=hi);
            let f2 = rng.random_range(lo..=hi);
            let phase = rng.random_range(0.0..2.0 * PI);
            let mut features: Vec<Vec<f64>> =
                times.iter().map(|&t| vec![sinemix_signal(t, window, 1.0, f1, f2, phase)]).collect();
            add_noise(&mut rng, &mut features, spec.noise);
            inject_missing(&mut rng, &mut features, spec.missing_fraction);
            Ok(TimeSeries::new(times, features, Target::Regression(f1))?)
        })
        .collect()
}

/// Parameters of one two-tone signal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoTone {
    pub amps: [f64; 2],
    pub freqs: [f64; 2],
    pub phases: [f64; 2],
}

impl TwoTone {
    pub fn value(&self, t: f64, window: f64) -> f64 {
        (0..2).map(|j| self.amps[j] * (2.0 * PI * self.freqs[j] * t / window + self.phases[j]).sin()).sum()
    }
}

/// Indices observed by the forecasting split: even indices of the first half.
pub fn sine2_observed(n: usize, k: usize) -> bool {
    k < n / 2 && k % 2 == 0
}

pub fn gen_sine2(spec: &DatasetSpec, seed: u64) -> Result<Vec<TimeSeries>, DatagenError> {
    Ok(gen_sine2_with_params(spec, seed)?.into_iter().map(|(s, _)| s).collect())
}

pub fn gen_sine2_with_params(spec: &DatasetSpec, seed: u64) -> Result<Vec<(TimeSeries, TwoTone)>, DatagenError> {
    spec.validate()?;
    let window = spec.window_length();
    (0..spec.n_sequences)
        .map(|i| {
            let mut rng = indexed_substream(seed, "dataset/sine2", i as u64);
            let n = draw_length(&mut rng, spec.length_range());
            let times = timestamps(&mut rng, n, window, spec.irregularity_mode());
            let (lo, hi) = spec.frequency;
            let tone = TwoTone {
                amps: [rng.random_range(0.5..=1.0), rng.random_range(0.5..=1.0)],
                freqs: [rng.random_range(lo..=hi), rng.random_range(lo..=hi)],
                phases: [rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI)],
            };
            let mut clean: Vec<f64> = times.iter().map(|&t| tone.value(t, window)).collect();
            if spec.noise > 0.0 {
                for v in &mut clean {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *v += spec.noise * z;
                }
            }
            let mut features = Vec::with_capacity(n);
            let mut q_times = Vec::new();
            let mut q_values = Vec::new();
            for k in 0..n {
                if sine2_observed(n, k) {
                    features.push(vec![clean[k]]);
                } else {
                    features.push(vec![f64::NAN]);
                    q_times.push(times[k]);
                    q_values.push(vec![clean[k]]);
                }
            }
            let observed_rows: Vec<usize> = (0..n).filter(|&k| sine2_observed(n, k)).collect();
            if spec.missing_fraction > 0.0 {
                let k = (spec.missing_fraction * observed_rows.len() as f64).round() as usize;
                for j in index::sample(&mut rng, observed_rows.len(), k.min(observed_rows.len())) {
                    features[observed_rows[j]][0] = f64::NAN;
                }
            }
            let series =
                TimeSeries::new(times, features, Target::Forecast { times: q_times, values: q_values })?;
            Ok((series, tone))
        })
        .collect()
}

/// Parameters of one simulated pendulum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PendulumParams {
    pub omega: f64,
    pub damping: f64,
    pub theta0: f64,
    pub velocity0: f64,
}

/// `θ'' = −ω² sin θ − c θ'` with classical RK4 at step `window / 10000`,
/// landing exactly on each requested time. Returns `(θ, θ')` per time.
pub fn simulate_pendulum(p: &PendulumParams, times: &[f64], window: f64) -> Vec<[f64; 2]> {
    let h_max = window / 10_000.0;
    let f = |s: [f64; 2]| [s[1], -p.omega * p.omega * s[0].sin() - p.damping * s[1]];
    let mut state = [p.theta0, p.velocity0];
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        while t < target {
            let h = h_max.min(target - t);
            let k1 = f(state);
            let k2 = f([state[0] + 0.5 * h * k1[0], state[1] + 0.5 * h * k1[1]]);
            let k3 = f([state[0] + 0.5 * h * k2[0], state[1] + 0.5 * h * k2[1]]);
            let k4 = f([state[0] + h * k3[0], state[1] + h * k3[1]]);
            for j in 0..2 {
                state[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
            t = if target - t <= h_max { target } else { t + h };
        }
        out.push(state);
    }
    out
}

pub fn pendulum_energy(p: &PendulumParams, s: [f64; 2]) -> f64 {
    0.5 * s[1] * s[1] + p.omega * p.omega * (1.0 - s[0].cos())
}

pub fn gen_pendulum(spec: &DatasetSpec, seed: u64) -> Result<Vec<TimeSeries>, DatagenError> {
    Ok(gen_pendulum_with_params(spec, seed)?.into_iter().map(|(s, _)| s).collect())
}

pub fn gen_pendulum_with_params(spec: &DatasetSpec, seed: u64) -> Result<Vec<(TimeSeries, PendulumParams)>, DatagenError> {
    spec.validate()?;
    let window = spec.window_length();
    (0..spec.n_sequences)
        .map(|i| {
            let mut rng = indexed_substream(seed, "dataset/pendulum", i as u64);
            let n = draw_length(&mut rng, spec.length_range());
            let times = timestamps(&mut rng, n, window, spec.irregularity_mode());
            let p = PendulumParams {
                omega: rng.random_range(0.5..=2.0),
                damping: (rng.random_range(0.05f64.ln()..=1f64.ln())).exp(),
                theta0: rng.random_range(-PI / 2.0..=PI / 2.0),
                velocity0: 0.0,
            };
            let states = simulate_pendulum(&p, &times, window);
            let mut features: Vec<Vec<f64>> = states.iter().map(|s| s.to_vec()).collect();
            add_noise(&mut rng, &mut features, spec.noise);
            inject_missing(&mut rng, &mut features, spec.missing_fraction);
            Ok((TimeSeries::new(times, features, Target::Regression(p.damping))?, p))
        })
        .collect()
}

/// Generates the full (unsplit) collection for `spec`; each sequence draws
/// from its own stream keyed by `(seed, index)`.
pub fn generate(spec: &DatasetSpec, seed: u64) -> Result<Vec<TimeSeries>, DatagenError> {
    match spec.kind {
        DatasetKind::Bump => gen_bump(spec, seed),
        DatasetKind::SineMix => gen_sinemix(spec, seed),
        DatasetKind::Sine2 => gen_sine2(spec, seed),
        DatasetKind::Pendulum => gen_pendulum(spec, seed),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    Drop,
    Change,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub fraction: f64,
    pub seed: u64,
}

/// Perturbs `⌊p·n⌋` uniformly chosen observation rows. Timestamps and targets are untouched.
pub fn attack(series: &TimeSeries, spec: &AttackSpec, index_in_set: u64) -> Result<TimeSeries, DatagenError> {
    if !(0.0..=1.0).contains(&spec.fraction) {
        return Err(DatagenError::InvalidSpec { field: "fraction", message: "must lie in [0, 1]".into() });
    }
    let mut out = series.clone();
    let n = out.len();
    let k = (spec.fraction * n as f64).floor() as usize;
    if k == 0 {
        return Ok(out);
    }
    let mut rng = indexed_substream(spec.seed, "attack", index_in_set);
    for row in index::sample(&mut rng, n, k) {
        for v in out.features_mut()[row].iter_mut() {
            *v = match spec.kind {
                AttackKind::Drop => f64::NAN,
                AttackKind::Change => StandardNormal.sample(&mut rng),
            };
        }
    }
    Ok(out)
}

pub fn attack_set(set: &[TimeSeries], spec: &AttackSpec) -> Result<Vec<TimeSeries>, DatagenError> {
    set.iter().enumerate().map(|(i, s)| attack(s, spec, i as u64)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    pub train: Vec<TimeSeries>,
    pub val: Vec<TimeSeries>,
    pub test: Vec<TimeSeries>,
}

/// Seeded split; classification targets are stratified by class.
pub fn split(set: Vec<TimeSeries>, fractions: (f64, f64, f64), seed: u64) -> Result<Splits, DatagenError> {
    let f = [fractions.0, fractions.1, fractions.2];
    if f.iter().any(|&x| x < 0.0) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(DatagenError::BadFractions(f.to_vec()));
    }
    let mut rng = substream(seed, "split");
    let mut groups: Vec<(Option<usize>, Vec<usize>)> = Vec::new();
    for (i, s) in set.iter().enumerate() {
        let key = match s.target {
            Target::Class(c) => Some(c),
            _ => None,
        };
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(i),
            None => groups.push((key, vec![i])),
        }
    }
    groups.sort_by_key(|(k, _)| *k);
    let mut assign = vec![0u8; set.len()];
    for (_, idx) in &mut groups {
        idx.shuffle(&mut rng);
        let n = idx.len() as f64;
        let a = (f[0] * n).round() as usize;
        let b = ((f[0] + f[1]) * n).round() as usize;
        for (j, &i) in idx.iter().enumerate() {
            assign[i] = if j < a {
                0
            } else if j < b {
                1
            } else {
                2
            };
        }
    }
    let mut out = Splits { train: Vec::new(), val: Vec::new(), test: Vec::new() };
    for (s, a) in set.into_iter().zip(assign) {
        match a {
            0 => out.train.push(s),
            1 => out.val.push(s),
            _ => out.test.push(s),
        }
    }
    for (name, part) in [("train", &out.train), ("val", &out.val), ("test", &out.test)] {
        if part.is_empty() {
            return Err(DatagenError::EmptySplit(name));
        }
    }
    Ok(out)
}

/// Generates and splits a dataset, applying the optional training-set limit.
pub fn build(spec: &DatasetSpec, seed: u64) -> Result<Splits, DatagenError> {
    let set = generate(spec, seed)?;
    let mut splits = split(set, spec.fractions, seed)?;
    if let Some(limit) = spec.train_limit {
        splits.train.truncate(limit.max(1));
    }
    Ok(splits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_values() {
        assert!((bump(20.0, 0.0) - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(bump(20.0, 0.05), 0.0);
        assert_eq!(bump(20.0, -0.07), 0.0);
    }

    #[test]
    fn bump_classes() {
        let spec = DatasetSpec::new(DatasetKind::Bump, 20);
        let set = generate(&spec, 1).unwrap();
        let pos = set.iter().filter(|s| s.target == Target::Class(1)).count();
        assert_eq!(pos, 10);
        for s in &set {
            if s.target == Target::Class(0) {
                assert!(s.features().iter().all(|r| r[0] == 0.0));
            } else {
                assert!(s.features().iter().any(|r| r[0] > 0.0));
            }
            assert_eq!(s.times()[0], 0.0);
        }
    }

    #[test]
    fn sinemix_is_continuous_at_midpoint() {
        let (a, f1, f2, ph) = (1.0, 2.3, 4.1, 0.7);
        let left = a * (2.0 * PI * f1 * 0.5 + ph).sin();
        let right = sinemix_signal(0.5 + 1e-300, 1.0, a, f1, f2, ph);
        assert!((left - right).abs() < 1e-12);
        for t in [0.1, 0.6, 0.9] {
            let single = sinemix_signal(t, 1.0, a, f1, f1, ph);
            assert!((single - (2.0 * PI * f1 * t + ph).sin()).abs() < 1e-12);
        }
        let spec = DatasetSpec::new(DatasetKind::SineMix, 4);
        for s in generate(&spec, 3).unwrap() {
            let Target::Regression(f) = s.target else { panic!() };
            assert!((1.0..=5.0).contains(&f));
        }
    }

    #[test]
    fn sine2_partitions_the_grid() {
        let spec = DatasetSpec { length: Some((40, 60)), ..DatasetSpec::new(DatasetKind::Sine2, 5) };
        let set = gen_sine2_with_params(&spec, 9).unwrap();
        for (s, tone) in set {
            let Target::Forecast { times, values } = &s.target else { panic!() };
            let n = s.len();
            let observed = (0..n).filter(|&k| !s.is_missing(k, 0)).count();
            assert_eq!(observed + times.len(), n);
            for (t, v) in times.iter().zip(values) {
                assert_eq!(v[0], tone.value(*t, 1.0));
            }
        }
    }

    #[test]
    fn undamped_pendulum_conserves_energy() {
        let p = PendulumParams { omega: 1.7, damping: 0.0, theta0: 1.2, velocity0: 0.0 };
        let times: Vec<f64> = (1..=50).map(|k| k as f64 * 0.4).collect();
        let e0 = pendulum_energy(&p, [p.theta0, 0.0]);
        for s in simulate_pendulum(&p, &times, 20.0) {
            assert!((pendulum_energy(&p, s) - e0).abs() < 1e-6);
        }
    }

    #[test]
    fn damping_shrinks_amplitude() {
        let p = PendulumParams { omega: 1.0, damping: 1.0, theta0: 1.0, velocity0: 0.0 };
        let s = simulate_pendulum(&p, &[20.0], 20.0);
        assert!(s[0][0].abs() < 1.0);
        assert!(pendulum_energy(&p, s[0]) < pendulum_energy(&p, [1.0, 0.0]));
    }

    #[test]
    fn missing_fraction_is_exact_per_sequence() {
        let spec = DatasetSpec { missing_fraction: 0.3, ..DatasetSpec::new(DatasetKind::Pendulum, 3) };
        for s in generate(&spec, 2).unwrap() {
            let total = s.len() * 2;
            let missing: usize = (0..s.len()).map(|k| (0..2).filter(|&c| s.is_missing(k, c)).count()).sum();
            assert!(((missing as f64 / total as f64) - 0.3).abs() <= 1.0 / total as f64);
        }
    }

    #[test]
    fn attacks() {
        let spec = DatasetSpec::new(DatasetKind::Pendulum, 2);
        let set = generate(&spec, 4).unwrap();
        let s = &set[0];
        let none = AttackSpec { kind: AttackKind::Change, fraction: 0.0, seed: 1 };
        assert_eq!(&attack(s, &none, 0).unwrap(), s);
        let all = AttackSpec { kind: AttackKind::Drop, fraction: 1.0, seed: 1 };
        let dropped = attack(s, &all, 0).unwrap();
        assert!(dropped.features().iter().flatten().all(|v| v.is_nan()));
        let change = AttackSpec { kind: AttackKind::Change, fraction: 0.1, seed: 1 };
        let changed = attack(s, &change, 0).unwrap();
        assert_eq!(changed.times(), s.times());
        assert_eq!(changed.target, s.target);
        let differing = (0..s.len()).filter(|&k| changed.features()[k] != s.features()[k]).count();
        assert_eq!(differing, (0.1 * s.len() as f64).floor() as usize);
    }

    #[test]
    fn split_sizes_and_stratification() {
        let spec = DatasetSpec::new(DatasetKind::Bump, 100);
        let set = generate(&spec, 5).unwrap();
        let a = split(set.clone(), (0.8, 0.1, 0.1), 11).unwrap();
        assert_eq!((a.train.len(), a.val.len(), a.test.len()), (80, 10, 10));
        for part in [&a.train, &a.val, &a.test] {
            let pos = part.iter().filter(|s| s.target == Target::Class(1)).count() as i64;
            assert!((2 * pos - part.len() as i64).abs() <= 2);
        }
        let b = split(set.clone(), (0.8, 0.1, 0.1), 11).unwrap();
        assert_eq!(a, b);
        assert!(split(set.clone(), (0.5, 0.6, 0.1), 1).is_err());
        assert!(matches!(split(set, (1.0, 0.0, 0.0), 1), Err(DatagenError::EmptySplit("val"))));
    }

    #[test]
    fn generation_is_pure() {
        let spec = DatasetSpec::new(DatasetKind::SineMix, 6);
        assert_eq!(generate(&spec, 8).unwrap(), generate(&spec, 8).unwrap());
        assert_ne!(generate(&spec, 8).unwrap(), generate(&spec, 9).unwrap());
    }
}
