//! Dormand–Prince 5(4) integration with adaptive step control.
//!
//! The integrator is generic over [`OdeSystem`], so the same stepping logic
//! runs on plain vectors and on autodiff tape variables. On the tape, rejected
//! steps are rolled back so only accepted steps are differentiated.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("non-finite vector field output at t = {t}")]
    NonFinite { t: f64 },
    #[error("exceeded {max_steps} steps at t = {t} of {t_end}")]
    MaxSteps { max_steps: usize, t: f64, t_end: f64, partial: Vec<Vec<f64>>, nfe: usize },
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
    #[error("vector field evaluation failed at t = {t}: {message}")]
    Field { t: f64, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub rtol: f64,
    pub atol: f64,
    pub safety: f64,
    pub min_factor: f64,
    pub max_factor: f64,
    pub max_steps: usize,
    /// Disables adaptive control and uses this step (last step shortened to land).
    pub fixed_step: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-3,
            atol: 1e-3,
            safety: 0.9,
            min_factor: 0.2,
            max_factor: 10.0,
            max_steps: 100_000,
            fixed_step: None,
        }
    }
}

impl SolverConfig {
    pub fn with_tolerance(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidConfig(m.to_string()));
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return bad("rtol and atol must be positive");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        if !(self.min_factor > 0.0 && self.min_factor <= 1.0 && self.max_factor >= 1.0) {
            return bad("step factor clamp must satisfy 0 < min <= 1 <= max");
        }
        if let Some(dt) = self.fixed_step {
            if !(dt > 0.0) {
                return bad("fixed_step must be positive");
            }
        }
        Ok(())
    }
}

/// A right-hand side `dy/dt = f(t, y)` over some state representation.
pub trait OdeSystem {
    type State: Clone;

    fn eval(&mut self, t: f64, y: &Self::State) -> Result<Self::State, SolverError>;
    /// `y + Σ cᵢ·kᵢ`
    fn combine(&mut self, y: &Self::State, terms: &[(&Self::State, f64)]) -> Result<Self::State, SolverError>;
    fn values<'s>(&'s self, y: &'s Self::State) -> &'s [f64];
    /// Opaque marker for [`Self::rollback`].
    fn checkpoint(&self) -> usize {
        0
    }
    /// Forgets work done since `mark`; states created after it become invalid.
    fn rollback(&mut self, _mark: usize) {}
}

/// Plain-vector system from a closure `f(t, y, dy)`.
pub struct FnSystem<F> {
    f: F,
}

impl<F> FnSystem<F>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), SolverError>,
{
    pub fn new(f: F) -> Self {
        Self { f }
    }
}

impl<F> OdeSystem for FnSystem<F>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), SolverError>,
{
    type State = Vec<f64>;

    fn eval(&mut self, t: f64, y: &Vec<f64>) -> Result<Vec<f64>, SolverError> {
        let mut dy = vec![0.0; y.len()];
        (self.f)(t, y, &mut dy)?;
        Ok(dy)
    }

    fn combine(&mut self, y: &Vec<f64>, terms: &[(&Vec<f64>, f64)]) -> Result<Vec<f64>, SolverError> {
        let mut out = y.clone();
        for (k, c) in terms {
            if *c != 0.0 {
                for (o, ki) in out.iter_mut().zip(k.iter()) {
                    *o += c * ki;
                }
            }
        }
        Ok(out)
    }

    fn values<'s>(&'s self, y: &'s Vec<f64>) -> &'s [f64] {
        y
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult<S> {
    pub final_state: S,
    /// One state per requested output time.
    pub samples: Vec<S>,
    pub nfe: usize,
    pub accepted: usize,
    pub rejected: usize,
}

impl<S> SolveResult<S> {
    pub fn nfe(&self) -> usize {
        self.nfe
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [&[f64]; 7] = [
    &[],
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// Output of one DOPRI5 step.
pub struct Step<S> {
    pub y_next: S,
    /// Derivative at the new point (first stage of the next step).
    pub k_last: S,
    /// Componentwise local error estimate.
    pub error: Vec<f64>,
}

fn check_finite<S: OdeSystem>(sys: &S, t: f64, k: &S::State) -> Result<(), SolverError> {
    if sys.values(k).iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(SolverError::NonFinite { t })
    }
}

/// One step from `(t, y)` with known derivative `k1`; evaluates the field six times.
pub fn dopri5_step<S: OdeSystem>(
    sys: &mut S,
    t: f64,
    y: &S::State,
    k1: &S::State,
    dt: f64,
) -> Result<Step<S::State>, SolverError> {
    let mut ks: Vec<S::State> = Vec::with_capacity(7);
    ks.push(k1.clone());
    let mut y_next = None;
    for stage in 1..7 {
        let terms: Vec<(&S::State, f64)> = A[stage].iter().enumerate().map(|(j, a)| (&ks[j], dt * a)).collect();
        let ys = sys.combine(y, &terms)?;
        let ts = t + C[stage] * dt;
        let k = sys.eval(ts, &ys)?;
        check_finite(sys, ts, &k)?;
        if stage == 6 {
            y_next = Some(ys);
        }
        ks.push(k);
    }
    let n = sys.values(y).len();
    let mut error = vec![0.0; n];
    for (k, e) in ks.iter().zip(E) {
        if e != 0.0 {
            for (acc, v) in error.iter_mut().zip(sys.values(k)) {
                *acc += dt * e * v;
            }
        }
    }
    let k_last = ks.pop().expect("seven stages");
    Ok(Step { y_next: y_next.expect("stage six"), k_last, error })
}

fn error_norm(error: &[f64], y: &[f64], y_next: &[f64], cfg: &SolverConfig) -> f64 {
    if error.is_empty() {
        return 0.0;
    }
    let sum: f64 = error
        .iter()
        .zip(y.iter().zip(y_next))
        .map(|(e, (a, b))| {
            let sc = cfg.atol + cfg.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / error.len() as f64).sqrt()
}

/// Integrates from `t0` to the last of `output_times`, landing exactly on
/// every output time. `output_times` must be sorted, non-empty and `> t0`
/// except that entries equal to `t0` return the initial state.
pub fn integrate<S: OdeSystem>(
    sys: &mut S,
    y0: S::State,
    t0: f64,
    output_times: &[f64],
    cfg: &SolverConfig,
) -> Result<SolveResult<S::State>, SolverError> {
    cfg.validate()?;
    let Some(&t_end) = output_times.last() else {
        return Err(SolverError::InvalidConfig("no output times".into()));
    };
    if output_times.windows(2).any(|w| w[1] < w[0]) || output_times[0] < t0 {
        return Err(SolverError::InvalidConfig("output times must be sorted and >= t0".into()));
    }
    let span = t_end - t0;
    let mut samples = Vec::with_capacity(output_times.len());
    let mut next_out = 0;
    while next_out < output_times.len() && output_times[next_out] <= t0 {
        samples.push(y0.clone());
        next_out += 1;
    }
    if next_out == output_times.len() {
        return Ok(SolveResult { final_state: y0, samples, nfe: 0, accepted: 0, rejected: 0 });
    }

    let mut t = t0;
    let mut y = y0;
    let mut k1 = sys.eval(t, &y)?;
    check_finite(sys, t, &k1)?;
    let mut nfe = 1;
    let (mut accepted, mut rejected) = (0usize, 0usize);
    let mut dt = cfg.fixed_step.unwrap_or((span / 100.0).clamp(1e-6_f64.min(span), span));

    loop {
        if accepted + rejected >= cfg.max_steps {
            let partial = samples.iter().map(|s| sys.values(s).to_vec()).collect();
            return Err(SolverError::MaxSteps { max_steps: cfg.max_steps, t, t_end, partial, nfe });
        }
        let target = output_times[next_out];
        let remaining = target - t;
        let planned = dt;
        let landing = dt >= remaining * (1.0 - 1e-12);
        let step = if landing { remaining } else { dt };

        let mark = sys.checkpoint();
        let out = dopri5_step(sys, t, &y, &k1, step)?;
        nfe += 6;

        let factor = if cfg.fixed_step.is_some() {
            1.0
        } else {
            let err = error_norm(&out.error, sys.values(&y), sys.values(&out.y_next), cfg);
            if !err.is_finite() {
                return Err(SolverError::NonFinite { t });
            }
            if err > 1.0 {
                rejected += 1;
                sys.rollback(mark);
                dt = step * (cfg.safety * err.powf(-0.2)).clamp(cfg.min_factor, cfg.max_factor);
                continue;
            }
            if err == 0.0 {
                cfg.max_factor
            } else {
                (cfg.safety * err.powf(-0.2)).clamp(cfg.min_factor, cfg.max_factor)
            }
        };

        accepted += 1;
        y = out.y_next;
        k1 = out.k_last;
        let proposal = step * factor;
        if landing {
            t = target;
            while next_out < output_times.len() && output_times[next_out] <= t {
                samples.push(y.clone());
                next_out += 1;
            }
            if next_out == output_times.len() {
                break;
            }
            dt = match cfg.fixed_step {
                Some(h) => h,
                None => planned.max(proposal),
            };
        } else {
            t += step;
            dt = proposal;
        }
    }
    Ok(SolveResult { final_state: y, samples, nfe, accepted, rejected })
}

/// Convenience wrapper for plain closures over `[t0, t1]`.
pub fn integrate_fn<F>(f: F, y0: &[f64], t0: f64, t1: f64, cfg: &SolverConfig) -> Result<SolveResult<Vec<f64>>, SolverError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), SolverError>,
{
    let mut sys = FnSystem::new(f);
    integrate(&mut sys, y0.to_vec(), t0, &[t1], cfg)
}
