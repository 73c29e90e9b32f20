//! Stationary Gaussian-process kernels, posterior variance and the Monte
//! Carlo test that stretching an interval never lowers the posterior variance.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error("Gram matrix is singular")]
    Singular,
    #[error("kernel parameter {name} must be positive, got {value}")]
    BadParameter { name: &'static str, value: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GpKernel {
    /// `K(τ) = variance · exp(−τ² / (2ℓ²))`.
    SquaredExponential { length_scale: f64, variance: f64 },
    /// Spectral density `F(ν) = Q / (ν⁴ + ξ⁴)` over frequency `ν` in cycles per unit time,
    /// so `K(τ) = ∫ F(ν) cos(2πντ) dν`.
    QuarticSpectral { xi: f64, q: f64 },
}

impl GpKernel {
    pub fn unit_squared_exponential() -> Self {
        GpKernel::SquaredExponential { length_scale: 1.0, variance: 1.0 }
    }

    pub fn validate(&self) -> Result<(), GpError> {
        let params: [(&'static str, f64); 2] = match *self {
            GpKernel::SquaredExponential { length_scale, variance } => [("length_scale", length_scale), ("variance", variance)],
            GpKernel::QuarticSpectral { xi, q } => [("xi", xi), ("q", q)],
        };
        for (name, value) in params {
            if !(value > 0.0) {
                return Err(GpError::BadParameter { name, value });
            }
        }
        Ok(())
    }

    pub fn cov(&self, tau: f64) -> f64 {
        match *self {
            GpKernel::SquaredExponential { length_scale, variance } => {
                variance * (-(tau * tau) / (2.0 * length_scale * length_scale)).exp()
            }
            GpKernel::QuarticSpectral { xi, q } => {
                let s = 2.0 * PI * xi * tau.abs() / SQRT_2;
                q * PI / (SQRT_2 * xi.powi(3)) * (-s).exp() * (s.cos() + s.sin())
            }
        }
    }

    pub fn spectral_density(&self, nu: f64) -> f64 {
        match *self {
            GpKernel::SquaredExponential { length_scale, variance } => {
                let l = length_scale;
                variance * (2.0 * PI).sqrt() * l * (-2.0 * (PI * l * nu).powi(2)).exp()
            }
            GpKernel::QuarticSpectral { xi, q } => q / (nu.powi(4) + xi.powi(4)),
        }
    }

    pub fn gram(&self, times: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(times.len(), times.len(), |i, j| self.cov(times[i] - times[j]))
    }
}

/// `K(0) − kᵀK⁻¹k` for noiseless observations at `times`.
pub fn posterior_variance(kernel: &GpKernel, times: &[f64], query: f64) -> Result<f64, GpError> {
    if times.is_empty() {
        return Ok(kernel.cov(0.0));
    }
    let lu = kernel.gram(times).lu();
    let k = DVector::from_iterator(times.len(), times.iter().map(|&t| kernel.cov(t - query)));
    let alpha = lu.solve(&k).ok_or(GpError::Singular)?;
    Ok(kernel.cov(0.0) - k.dot(&alpha))
}

/// `ln(K(0) − kᵀK⁻¹k)` for the squared-exponential kernel, accurate where the
/// Gram matrix is far too ill-conditioned for a direct solve.
///
/// In units of the length scale, `K_ij = e^{−t_i²/2} e^{t_i t_j} e^{−t_j²/2}`. Expanding
/// `e^{xy}` in the Newton basis of the nodes gives
/// `K(0) − kᵀK⁻¹k = σ² e^{−q²} Π(q − t_i)² · s`, where `s` is the Schur complement of
/// the query in the Gram matrix of divided differences of `e^{xy}`. Those divided
/// differences are series in complete homogeneous polynomials of the nodes; centring
/// the nodes keeps their Gram matrix well conditioned. Returns `−∞` when the query
/// coincides with an observation.
pub fn se_log_posterior_variance(length_scale: f64, variance: f64, times: &[f64], query: f64) -> Result<f64, GpError> {
    GpKernel::SquaredExponential { length_scale, variance }.validate()?;
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) || sorted.iter().any(|t| !t.is_finite()) || !query.is_finite() {
        return Err(GpError::Singular);
    }
    if times.iter().any(|&t| t == query) {
        return Ok(f64::NEG_INFINITY);
    }
    let lo = sorted.first().map_or(query, |&t| t.min(query));
    let hi = sorted.last().map_or(query, |&t| t.max(query));
    let centre = 0.5 * (lo + hi);
    let nodes: Vec<f64> = sorted.iter().chain(std::iter::once(&query)).map(|&t| (t - centre) / length_scale).collect();
    let q = nodes[nodes.len() - 1];
    let n = nodes.len();
    let columns = scaled_divided_differences(&nodes);
    let width = n + columns.len();
    let p = DMatrix::from_fn(n, width, |k, m| if m >= k && m - k < columns.len() { columns[m - k][k] } else { 0.0 });
    let chol = (&p * p.transpose()).cholesky().ok_or(GpError::Singular)?;
    let tail = chol.l()[(n - 1, n - 1)];
    let ln_factorial: f64 = (1..n).map(|i| (i as f64).ln()).sum();
    let ln_nodal: f64 = nodes[..n - 1].iter().map(|&t| (q - t).abs().ln()).sum();
    Ok(variance.ln() - q * q + 2.0 * ln_nodal + 2.0 * tail.ln() - ln_factorial)
}

/// Column `j` holds `h_j(t_0..t_k) · √(k!/(k+j)!)` for every `k`, with `h_j` the complete
/// homogeneous polynomial; columns stop once they are negligible against the largest entry.
fn scaled_divided_differences(nodes: &[f64]) -> Vec<Vec<f64>> {
    const CUTOFF: f64 = 1e-18;
    const MAX_COLUMNS: usize = 20_000;
    let mut columns = vec![vec![1.0; nodes.len()]];
    let mut peak = 1.0_f64;
    while columns.len() < MAX_COLUMNS {
        let j = columns.len() as f64;
        let prev = &columns[columns.len() - 1];
        let mut col = Vec::with_capacity(nodes.len());
        for (k, &t) in nodes.iter().enumerate() {
            let kf = k as f64;
            let carried = if k == 0 { 0.0 } else { col[k - 1] * (kf / (kf + j)).sqrt() };
            col.push(carried + t * prev[k] / (kf + j).sqrt());
        }
        let size = col.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        peak = peak.max(size);
        columns.push(col);
        if size < CUTOFF * peak {
            break;
        }
    }
    columns
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionTrial {
    pub n: usize,
    pub shift: f64,
    pub split: usize,
    pub query: f64,
    pub log_variance: f64,
    pub log_stretched_variance: f64,
    pub retries: usize,
}

impl AssumptionTrial {
    pub fn holds(&self) -> bool {
        self.log_variance < self.log_stretched_variance
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub iterations: usize,
    pub failures: usize,
    pub singular_retries: usize,
    pub trials: Vec<AssumptionTrial>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// One iteration with a given length `n ≥ 2` and shift `r` under a squared-exponential
/// kernel; singular Gram matrices redraw the times, keeping `n` and `r`.
pub fn assumption_trial<R: Rng + ?Sized>(length_scale: f64, n: usize, shift: f64, rng: &mut R) -> AssumptionTrial {
    let mut retries = 0;
    loop {
        let mut times: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        times.sort_by(f64::total_cmp);
        times[0] = 0.0;
        times[n - 1] = 1.0;
        let split = rng.random_range(1..n);
        let stretched: Vec<f64> =
            times.iter().enumerate().map(|(k, &t)| if k >= split { t + shift } else { t }).collect();
        let query: f64 = rng.random();
        let mapped = if times[split] < query { query + shift } else { query };
        match (
            se_log_posterior_variance(length_scale, 1.0, &times, query),
            se_log_posterior_variance(length_scale, 1.0, &stretched, mapped),
        ) {
            (Ok(log_variance), Ok(log_stretched_variance)) => {
                return AssumptionTrial { n, shift, split, query, log_variance, log_stretched_variance, retries }
            }
            _ => retries += 1,
        }
    }
}

/// Random `n ∈ [5, 300]`, shift `r ∈ [0, 1)`, unit squared-exponential kernel.
pub fn assumption_test_mc<R: Rng + ?Sized>(iterations: usize, rng: &mut R) -> AssumptionReport {
    let mut trials = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let n = rng.random_range(5..=300);
        let shift: f64 = rng.random();
        trials.push(assumption_trial(1.0, n, shift, rng));
    }
    let failures = trials.iter().filter(|t| !t.holds()).count();
    let singular_retries = trials.iter().map(|t| t.retries).sum();
    AssumptionReport { iterations, failures, singular_retries, trials }
}
