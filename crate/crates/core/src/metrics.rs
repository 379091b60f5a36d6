use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("{probs} probabilities vs {labels} labels")]
    LengthMismatch { probs: usize, labels: usize },
    #[error("no samples")]
    Empty,
}

/// Confusion counts with accuracy/precision/recall. Precision (recall) is
/// reported as 1.0 when it has no denominator; the matching `*_undefined`
/// flag records that.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

pub fn binary_metrics(
    probs: &[f64],
    labels: &[bool],
    threshold: f64,
) -> Result<BinaryMetrics, MetricsError> {
    if probs.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            probs: probs.len(),
            labels: labels.len(),
        });
    }
    if probs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&p, &y) in probs.iter().zip(labels) {
        match (p >= threshold, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            1.0
        } else {
            num as f64 / den as f64
        }
    };
    Ok(BinaryMetrics {
        accuracy: (tp + tn) as f64 / probs.len() as f64,
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        tp,
        fp,
        fn_,
        tn,
        precision_undefined: tp + fp == 0,
        recall_undefined: tp + fn_ == 0,
    })
}
