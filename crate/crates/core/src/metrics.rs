//! Confusion-matrix metrics with support-weighted averaging, and mean/std
//! aggregation across seeds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `k x k` counts, `counts[t][p]` = samples of true class `t` predicted `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn supports(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }
}

pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::shape("confusion_matrix", y_true.len(), y_pred.len()));
    }
    let mut counts = vec![vec![0u64; k]; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= k || p >= k {
            return Err(Error::Domain(format!(
                "label pair ({t}, {p}) out of range for {k} classes"
            )));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// Accuracy plus support-weighted precision, recall and F1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: ConfusionMatrix,
    pub support: Vec<u64>,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn weighted_metrics(confusion: &ConfusionMatrix) -> Result<MetricsReport> {
    let k = confusion.num_classes();
    if k == 0 || confusion.counts.iter().any(|r| r.len() != k) {
        return Err(Error::Domain("confusion matrix must be square and non-empty".into()));
    }
    let total = confusion.total();
    if total == 0 {
        return Err(Error::Domain("confusion matrix has no samples".into()));
    }
    let n = total as f64;
    let support = confusion.supports();
    let predicted: Vec<u64> = (0..k).map(|p| confusion.counts.iter().map(|r| r[p]).sum()).collect();

    let mut trace = 0u64;
    let mut precision = 0.0;
    let mut f1 = 0.0;
    for c in 0..k {
        let tp = confusion.counts[c][c];
        trace += tp;
        let p = ratio(tp as f64, predicted[c] as f64);
        let r = ratio(tp as f64, support[c] as f64);
        let f = ratio(2.0 * p * r, p + r);
        let w = support[c] as f64;
        precision += w * p;
        f1 += w * f;
    }
    // support_c * (tp_c / support_c) == tp_c, so weighted recall is trace / n.
    let accuracy = trace as f64 / n;
    Ok(MetricsReport {
        accuracy,
        precision: precision / n,
        recall: accuracy,
        f1: f1 / n,
        confusion: confusion.clone(),
        support,
    })
}

/// Convenience: confusion matrix then weighted metrics.
pub fn evaluate(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<MetricsReport> {
    weighted_metrics(&confusion_matrix(y_true, y_pred, k)?)
}

/// The four headline numbers of a report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl From<&MetricsReport> for MetricValues {
    fn from(r: &MetricsReport) -> Self {
        MetricValues {
            accuracy: r.accuracy,
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub n: usize,
    pub mean: MetricValues,
    pub std: MetricValues,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    // shifted by the first value so identical inputs give exactly (v, 0)
    let v0 = values[0];
    let mean = v0 + values.iter().map(|v| v - v0).sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean and sample (n-1) standard deviation of every metric.
pub fn aggregate_seeds(reports: &[MetricValues]) -> Result<SeedSummary> {
    if reports.len() < 2 {
        return Err(Error::Domain(format!("need at least 2 reports, got {}", reports.len())));
    }
    let col = |f: fn(&MetricValues) -> f64| mean_std(&reports.iter().map(f).collect::<Vec<_>>());
    let (am, asd) = col(|m| m.accuracy);
    let (pm, psd) = col(|m| m.precision);
    let (rm, rsd) = col(|m| m.recall);
    let (fm, fsd) = col(|m| m.f1);
    Ok(SeedSummary {
        n: reports.len(),
        mean: MetricValues {
            accuracy: am,
            precision: pm,
            recall: rm,
            f1: fm,
        },
        std: MetricValues {
            accuracy: asd,
            precision: psd,
            recall: rsd,
            f1: fsd,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counted_confusion() {
        let c = confusion_matrix(&[0, 0, 1, 1], &[0, 0, 0, 1], 2).unwrap();
        assert_eq!(c.counts, vec![vec![2, 0], vec![1, 1]]);
        assert!(confusion_matrix(&[0, 2], &[0, 0], 2).is_err());
        assert!(confusion_matrix(&[0], &[0, 0], 2).is_err());
    }

    #[test]
    fn perfect_predictions() {
        let r = evaluate(&[0, 1, 2, 2], &[0, 1, 2, 2], 3).unwrap();
        assert_eq!((r.accuracy, r.precision, r.recall, r.f1), (1.0, 1.0, 1.0, 1.0));
        assert_eq!(r.confusion.counts[2][2], 2);
    }

    #[test]
    fn two_class_hand_example() {
        let c = ConfusionMatrix {
            counts: vec![vec![2, 0], vec![1, 1]],
        };
        let r = weighted_metrics(&c).unwrap();
        assert!((r.accuracy - 0.75).abs() < 1e-12);
        assert!((r.recall - 0.75).abs() < 1e-12);
        assert!((r.precision - 5.0 / 6.0).abs() < 1e-12);
        // per-class F1: 0.8 and 2/3
        assert!((r.f1 - (0.8 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn absent_prediction_class_gives_zero_precision() {
        let r = evaluate(&[0, 1, 1], &[0, 0, 0], 2).unwrap();
        assert!(r.precision.is_finite());
        assert!((r.precision - (1.0 / 3.0) * (1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn empty_confusion_is_an_error() {
        let c = ConfusionMatrix {
            counts: vec![vec![0, 0], vec![0, 0]],
        };
        assert!(weighted_metrics(&c).is_err());
        assert!(weighted_metrics(&ConfusionMatrix { counts: vec![] }).is_err());
    }

    fn mv(x: f64) -> MetricValues {
        MetricValues {
            accuracy: x,
            precision: x,
            recall: x,
            f1: x,
        }
    }

    #[test]
    fn two_point_aggregate() {
        let s = aggregate_seeds(&[mv(0.8), mv(0.9)]).unwrap();
        assert!((s.mean.f1 - 0.85).abs() < 1e-12);
        assert!((s.std.f1 - 0.05_f64 * 2f64.sqrt()).abs() < 1e-12);
        let same = aggregate_seeds(&[mv(0.7), mv(0.7), mv(0.7)]).unwrap();
        assert_eq!(same.std.accuracy, 0.0);
        assert!(aggregate_seeds(&[mv(0.5)]).is_err());
    }
}
