//! Natural cubic spline control paths.
//!
//! Each channel is interpolated independently through its observed knots only.
//! Inside the path domain but outside a channel's first/last observation the
//! channel holds its boundary value.

use crate::series::{validate_times, SeriesError, TimeSeries};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("t = {t} is outside the path domain [{start}, {end}]")]
    OutOfDomain { t: f64, start: f64, end: f64 },
    #[error("knot times and values differ in length ({times} vs {values})")]
    LengthMismatch { times: usize, values: usize },
}

/// One channel of a natural cubic spline, stored as knot values plus second
/// derivatives at the knots.
#[derive(Clone, Debug, PartialEq)]
pub enum CubicSpline {
    Constant(f64),
    Cubic { t: Vec<f64>, y: Vec<f64>, m: Vec<f64> },
}

impl CubicSpline {
    /// Fits the natural spline through `(t, y)`. Fewer than two knots give a
    /// constant (zero when empty).
    pub fn fit(t: &[f64], y: &[f64]) -> Result<Self, InterpError> {
        if t.len() != y.len() {
            return Err(InterpError::LengthMismatch { times: t.len(), values: y.len() });
        }
        match t.len() {
            0 => return Ok(Self::Constant(0.0)),
            1 => return Ok(Self::Constant(y[0])),
            _ => {}
        }
        validate_times(t)?;
        let n = t.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Tridiagonal system for interior second derivatives (Thomas algorithm).
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for j in 0..k {
                let i = j + 1;
                let h0 = t[i] - t[i - 1];
                let h1 = t[i + 1] - t[i];
                diag[j] = 2.0 * (h0 + h1);
                upper[j] = h1;
                rhs[j] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            }
            for j in 1..k {
                let lower = t[j + 1] - t[j];
                let w = lower / diag[j - 1];
                diag[j] -= w * upper[j - 1];
                rhs[j] -= w * rhs[j - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for j in (0..k - 1).rev() {
                m[j + 1] = (rhs[j] - upper[j] * m[j + 2]) / diag[j];
            }
        }
        Ok(Self::Cubic { t: t.to_vec(), y: y.to_vec(), m })
    }

    fn segment(t: &[f64], x: f64) -> usize {
        match t.binary_search_by(|k| k.partial_cmp(&x).expect("finite knots")) {
            Ok(i) => i.min(t.len() - 2),
            Err(i) => i.saturating_sub(1).min(t.len() - 2),
        }
    }

    /// Value at `x`; held constant outside the knot range.
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Cubic { t, y, m } => {
                let n = t.len();
                if x <= t[0] {
                    return y[0];
                }
                if x >= t[n - 1] {
                    return y[n - 1];
                }
                let i = Self::segment(t, x);
                let h = t[i + 1] - t[i];
                let a = (t[i + 1] - x) / h;
                let b = (x - t[i]) / h;
                a * y[i]
                    + b * y[i + 1]
                    + ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) * h * h / 6.0
            }
        }
    }

    /// First derivative at `x`; zero outside the knot range.
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Self::Constant(_) => 0.0,
            Self::Cubic { t, y, m } => {
                let n = t.len();
                if x < t[0] || x > t[n - 1] {
                    return 0.0;
                }
                let i = Self::segment(t, x);
                let h = t[i + 1] - t[i];
                let a = (t[i + 1] - x) / h;
                let b = (x - t[i]) / h;
                (y[i + 1] - y[i]) / h + ((1.0 - 3.0 * a * a) * m[i] + (3.0 * b * b - 1.0) * m[i + 1]) * h / 6.0
            }
        }
    }

    /// Second derivative at `x`; zero outside the knot range.
    pub fn second_derivative(&self, x: f64) -> f64 {
        match self {
            Self::Constant(_) => 0.0,
            Self::Cubic { t, m, .. } => {
                let n = t.len();
                if x < t[0] || x > t[n - 1] {
                    return 0.0;
                }
                let i = Self::segment(t, x);
                let h = t[i + 1] - t[i];
                let a = (t[i + 1] - x) / h;
                a * m[i] + (1.0 - a) * m[i + 1]
            }
        }
    }

    /// Second derivatives at the knots (empty for constants).
    pub fn knot_second_derivatives(&self) -> &[f64] {
        match self {
            Self::Constant(_) => &[],
            Self::Cubic { m, .. } => m,
        }
    }
}

/// Multichannel control path on `[start, end]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplinePath {
    start: f64,
    end: f64,
    channels: Vec<CubicSpline>,
}

impl SplinePath {
    /// Fits every channel of `series` on its observed knots.
    pub fn fit(series: &TimeSeries) -> Result<Self, InterpError> {
        validate_times(series.times())?;
        let channels = (0..series.channels())
            .map(|c| {
                let (t, y): (Vec<f64>, Vec<f64>) = series.channel(c).into_iter().unzip();
                CubicSpline::fit(&t, &y)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let times = series.times();
        Ok(Self { start: times[0], end: times[times.len() - 1], channels })
    }

    pub fn from_channels(start: f64, end: f64, channels: Vec<CubicSpline>) -> Self {
        Self { start, end, channels }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.start, self.end)
    }

    pub fn channels(&self) -> &[CubicSpline] {
        &self.channels
    }

    pub fn dim(&self) -> usize {
        self.channels.len()
    }

    fn check(&self, t: f64) -> Result<(), InterpError> {
        let slack = 1e-12 * (self.end - self.start).abs().max(1.0);
        if !(t >= self.start - slack && t <= self.end + slack) {
            return Err(InterpError::OutOfDomain { t, start: self.start, end: self.end });
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>, InterpError> {
        self.check(t)?;
        Ok(self.channels.iter().map(|c| c.value(t)).collect())
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<(), InterpError> {
        self.check(t)?;
        for (o, c) in out.iter_mut().zip(&self.channels) {
            *o = c.value(t);
        }
        Ok(())
    }

    pub fn eval_derivative(&self, t: f64) -> Result<Vec<f64>, InterpError> {
        self.check(t)?;
        Ok(self.channels.iter().map(|c| c.derivative(t)).collect())
    }
}
