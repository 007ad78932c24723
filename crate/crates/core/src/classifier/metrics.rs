//! Threshold metrics and ROC AUC.

use super::ClassifierError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub tau: f64,
    /// True-positive rate `TP / (TP + FN)`.
    pub sensitivity: f64,
    /// True-negative rate `TN / (TN + FP)`.
    pub specificity: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ThresholdMetrics {
    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / (self.tp + self.fp + self.tn + self.fn_) as f64
    }
}

fn check(scores: &[f64], labels: &[u8]) -> Result<(), ClassifierError> {
    if scores.len() != labels.len() {
        return Err(ClassifierError::Length {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    Ok(())
}

/// Confusion matrix for the rule "positive iff score > tau". A class with no
/// members gets rate 1 (no errors are possible on it).
pub fn metrics_at_threshold(scores: &[f64], labels: &[u8], tau: f64) -> Result<ThresholdMetrics, ClassifierError> {
    check(scores, labels)?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s > tau, l == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let rate = |a: usize, b: usize| if a + b == 0 { 1.0 } else { a as f64 / (a + b) as f64 };
    Ok(ThresholdMetrics {
        tau,
        sensitivity: rate(tp, fn_),
        specificity: rate(tn, fp),
        tp,
        fp,
        tn,
        fn_,
    })
}

pub fn accuracy_at(scores: &[f64], labels: &[u8], tau: f64) -> Result<f64, ClassifierError> {
    Ok(metrics_at_threshold(scores, labels, tau)?.accuracy())
}

/// Area under the ROC curve by the trapezoid rule. Rows with equal scores
/// form a single ROC step, which is what makes the result tie-aware.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64, ClassifierError> {
    check(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(ClassifierError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        let (tp0, fp0) = (tp, fp);
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        area += (fp - fp0) as f64 * (tp + tp0) as f64 / 2.0;
    }
    Ok(area / (pos as f64 * neg as f64))
}
