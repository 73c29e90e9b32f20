//! Evaluation metrics and correlation statistics.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("metric needs at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("AUROC needs both classes present")]
    SingleClass,
    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
}

fn check(a: usize, b: usize, needed: usize) -> Result<(), MetricError> {
    if a != b {
        return Err(MetricError::Length(a, b));
    }
    if a < needed {
        return Err(MetricError::TooFew { needed, got: a });
    }
    Ok(())
}

/// `1 − SS_res / SS_tot`.
pub fn r2(pred: &[f64], target: &[f64]) -> Result<f64, MetricError> {
    check(pred.len(), target.len(), 1)?;
    let mean = target.iter().sum::<f64>() / target.len() as f64;
    let ss_tot: f64 = target.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = pred.iter().zip(target).map(|(p, y)| (p - y).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(MetricError::ZeroVariance("targets"));
    }
    Ok(1.0 - ss_res / ss_tot)
}

pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64, MetricError> {
    check(pred.len(), target.len(), 1)?;
    Ok(pred.iter().zip(target).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / pred.len() as f64)
}

/// Average ranks (1-based), ties sharing the mean rank.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Mann–Whitney form of the area under the ROC curve; ties count one half.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    check(scores.len(), labels.len(), 2)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::SingleClass);
    }
    let r = ranks(scores);
    let pos_rank_sum: f64 = r.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

/// Fraction of rows whose argmax equals the label.
pub fn accuracy(probs: &[Vec<f64>], labels: &[usize]) -> Result<f64, MetricError> {
    check(probs.len(), labels.len(), 1)?;
    let hits = probs
        .iter()
        .zip(labels)
        .filter(|(p, &l)| {
            let arg = p.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i);
            arg == Some(l)
        })
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorrelationKind {
    Pearson,
    Spearman,
}

pub fn correlation(xs: &[f64], ys: &[f64], kind: CorrelationKind) -> Result<f64, MetricError> {
    check(xs.len(), ys.len(), 3)?;
    match kind {
        CorrelationKind::Pearson => pearson(xs, ys),
        CorrelationKind::Spearman => pearson(&ranks(xs), &ranks(ys)),
    }
}

fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, MetricError> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 {
        return Err(MetricError::ZeroVariance("xs"));
    }
    if syy == 0.0 {
        return Err(MetricError::ZeroVariance("ys"));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let y = [1.0, 2.0, 4.0];
        assert_eq!(r2(&y, &y).unwrap(), 1.0);
        assert_eq!(auroc(&[0.1, 0.9, 0.8], &[false, true, true]).unwrap(), 1.0);
        assert_eq!(accuracy(&[vec![0.1, 0.9], vec![0.7, 0.3]], &[1, 0]).unwrap(), 1.0);
    }

    #[test]
    fn constant_baselines() {
        let y = [1.0, 2.0, 6.0];
        assert!(r2(&[3.0; 3], &y).unwrap().abs() < 1e-15);
        assert_eq!(auroc(&[0.4; 4], &[true, false, true, false]).unwrap(), 0.5);
        assert_eq!(auroc(&[0.4; 2], &[true, true]), Err(MetricError::SingleClass));
    }

    #[test]
    fn correlations() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        assert!((correlation(&xs, &ys, CorrelationKind::Pearson).unwrap() - 1.0).abs() < 1e-15);
        let ex: Vec<f64> = xs.iter().map(|x| f64::exp(3.0 * x)).collect();
        assert!((correlation(&xs, &ex, CorrelationKind::Spearman).unwrap() - 1.0).abs() < 1e-15);
        assert!(correlation(&xs, &ex, CorrelationKind::Pearson).unwrap() < 1.0);
        let s = correlation(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0], CorrelationKind::Spearman).unwrap();
        assert!((s + 0.5).abs() < 1e-15);
        assert!(correlation(&[1.0, 2.0], &[1.0, 2.0], CorrelationKind::Pearson).is_err());
        assert!(correlation(&[1.0; 3], &[1.0, 2.0, 3.0], CorrelationKind::Pearson).is_err());
    }

    #[test]
    fn average_ranks_for_ties() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }
}
