//! Irregularly sampled multivariate series with missing values.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("a series needs at least 2 timestamps, got {0}")]
    TooShort(usize),
    #[error("timestamps must be strictly increasing (index {index}: {prev} then {next})")]
    NotIncreasing { index: usize, prev: f64, next: f64 },
    #[error("row {row} has {got} features, expected {expected}")]
    RaggedRow { row: usize, got: usize, expected: usize },
    #[error("non-finite timestamp at index {0}")]
    NonFiniteTime(usize),
}

/// Supervision attached to a series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Regression(f64),
    Class(usize),
    /// Values to predict at query times; one row of `u` values per time.
    Forecast { times: Vec<f64>, values: Vec<Vec<f64>> },
}

/// Timestamps with an `n × u` feature matrix. Missing entries are `NaN`, so
/// the missing mask always has the feature shape.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    features: Vec<Vec<f64>>,
    pub target: Target,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, features: Vec<Vec<f64>>, target: Target) -> Result<Self, SeriesError> {
        validate_times(&times)?;
        if features.len() != times.len() {
            return Err(SeriesError::RaggedRow { row: features.len(), got: 0, expected: times.len() });
        }
        let u = features.first().map_or(0, Vec::len);
        for (row, f) in features.iter().enumerate() {
            if f.len() != u {
                return Err(SeriesError::RaggedRow { row, got: f.len(), expected: u });
            }
        }
        Ok(Self { times, features, target })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn features_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.features
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn is_missing(&self, k: usize, c: usize) -> bool {
        self.features[k][c].is_nan()
    }

    pub fn duration(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    /// Observed `(t, value)` pairs of one channel.
    pub fn channel(&self, c: usize) -> Vec<(f64, f64)> {
        self.times
            .iter()
            .zip(&self.features)
            .filter(|(_, row)| !row[c].is_nan())
            .map(|(&t, row)| (t, row[c]))
            .collect()
    }

    /// Multiplies every timestamp (including forecast query times) by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for t in &mut out.times {
            *t *= factor;
        }
        if let Target::Forecast { times, .. } = &mut out.target {
            for t in times {
                *t *= factor;
            }
        }
        out
    }

    /// Appends the gap to the previous timestamp as an extra channel (0 at the first step).
    pub fn with_gap_channel(&self) -> Self {
        let mut out = self.clone();
        for k in 0..out.times.len() {
            let gap = if k == 0 { 0.0 } else { out.times[k] - out.times[k - 1] };
            out.features[k].push(gap);
        }
        out
    }
}

pub(crate) fn validate_times(times: &[f64]) -> Result<(), SeriesError> {
    if times.len() < 2 {
        return Err(SeriesError::TooShort(times.len()));
    }
    for (i, t) in times.iter().enumerate() {
        if !t.is_finite() {
            return Err(SeriesError::NonFiniteTime(i));
        }
    }
    for i in 1..times.len() {
        if times[i] <= times[i - 1] {
            return Err(SeriesError::NotIncreasing { index: i, prev: times[i - 1], next: times[i] });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_increasing_times() {
        let err = TimeSeries::new(vec![0.0, 1.0, 1.0], vec![vec![0.0]; 3], Target::Regression(0.0));
        assert!(matches!(err, Err(SeriesError::NotIncreasing { index: 2, .. })));
    }

    #[test]
    fn channel_skips_missing() {
        let s = TimeSeries::new(
            vec![0.0, 1.0, 2.0],
            vec![vec![1.0], vec![f64::NAN], vec![3.0]],
            Target::Class(0),
        )
        .unwrap();
        assert_eq!(s.channel(0), vec![(0.0, 1.0), (2.0, 3.0)]);
        assert!(s.is_missing(1, 0));
    }

    #[test]
    fn gap_channel() {
        let s = TimeSeries::new(vec![0.0, 0.5, 2.0], vec![vec![1.0]; 3], Target::Class(0)).unwrap();
        let g = s.with_gap_channel();
        assert_eq!(g.features()[2], vec![1.0, 1.5]);
        assert_eq!(g.features()[0], vec![1.0, 0.0]);
    }
}
