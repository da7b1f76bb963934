use serde::{Deserialize, Serialize};

use crate::data::BinaryLabel;
use crate::error::{Error, Result};

/// Forced-prediction quality with malicious as the positive class.
/// Cells whose denominator is zero are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub f1: Option<f64>,
}

fn div(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// `pairs` yields `(predicted, truth)`.
pub fn classification_metrics(
    pairs: impl IntoIterator<Item = (BinaryLabel, BinaryLabel)>,
) -> Result<MetricsReport> {
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for (pred, truth) in pairs {
        match (pred, truth) {
            (BinaryLabel::Malicious, BinaryLabel::Malicious) => tp += 1,
            (BinaryLabel::Benign, BinaryLabel::Benign) => tn += 1,
            (BinaryLabel::Malicious, BinaryLabel::Benign) => fp += 1,
            (BinaryLabel::Benign, BinaryLabel::Malicious) => fn_ += 1,
        }
    }
    let total = tp + tn + fp + fn_;
    if total == 0 {
        return Err(Error::EmptyDataset);
    }
    let precision = div(tp, tp + fp);
    let recall = div(tp, tp + fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    Ok(MetricsReport {
        accuracy: div(tp + tn, total),
        sensitivity: recall,
        specificity: div(tn, tn + fp),
        f1,
    })
}

/// Mean of each field over the reports where it is defined.
pub fn mean_metrics(reports: &[MetricsReport]) -> MetricsReport {
    fn avg(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
        let v: Vec<f64> = values.flatten().collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
    MetricsReport {
        accuracy: avg(reports.iter().map(|r| r.accuracy)),
        sensitivity: avg(reports.iter().map(|r| r.sensitivity)),
        specificity: avg(reports.iter().map(|r| r.specificity)),
        f1: avg(reports.iter().map(|r| r.f1)),
    }
}
