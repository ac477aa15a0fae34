//! ROC curves, AUC and biomarker-selection performance.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// ROC curve as (false-positive rate, true-positive rate) points from (0,0)
/// to (1,1), with its trapezoidal area.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

fn class_counts(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            actual: scores.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::InvalidParameter(format!("score {i} is NaN")));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedAuc("scores cover a single class".into()));
    }
    Ok((pos, neg))
}

/// Sweeps thresholds over the distinct scores, highest first, predicting a
/// case when `score ≥ threshold`. Tied scores move the curve diagonally, so
/// the trapezoidal area equals the tie-corrected rank statistic exactly.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    let (pos, neg) = class_counts(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    // Twice the area in units of one case/control pair.
    let mut twice_area: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp_prev, fp_prev) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        twice_area += u128::from(fp - fp_prev) * u128::from(tp + tp_prev);
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    let auc = twice_area as f64 / (2.0 * pos as f64 * neg as f64);
    Ok(RocCurve { points, auc })
}

/// Area under the ROC curve.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    roc_curve(scores, labels).map(|c| c.auc)
}

/// Rank statistic over all case/control pairs: 1 when the case scores higher,
/// ½ on ties. Quadratic; meant as a reference for [`roc_curve`].
pub fn auc_rank(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = class_counts(scores, labels)?;
    let mut twice: u64 = 0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] == 1 {
                continue;
            }
            twice += if si > sj {
                2
            } else if si == sj {
                1
            } else {
                0
            };
        }
    }
    Ok(twice as f64 / (2.0 * pos as f64 * neg as f64))
}

/// Sensitivity and specificity when `score ≥ threshold` predicts a case.
pub fn confusion_at_threshold(scores: &[f64], labels: &[u8], threshold: f64) -> Result<(f64, f64)> {
    let (pos, neg) = class_counts(scores, labels)?;
    let (mut tp, mut tn) = (0usize, 0usize);
    for (&s, &y) in scores.iter().zip(labels) {
        let predicted = s >= threshold;
        match (y == 1, predicted) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            _ => {}
        }
    }
    Ok((tp as f64 / pos as f64, tn as f64 / neg as f64))
}

/// How well a biomarker selection recovers the truly relevant biomarkers.
/// Sensitivity is `None` without relevant biomarkers, specificity `None`
/// without irrelevant ones.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: f64,
}

pub fn selection_performance(selected: &[bool], relevant: &[bool]) -> Result<SelectionReport> {
    if selected.len() != relevant.len() {
        return Err(Error::LengthMismatch {
            expected: relevant.len(),
            actual: selected.len(),
        });
    }
    if selected.is_empty() {
        return Err(Error::InvalidParameter("empty selection".into()));
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &r) in selected.iter().zip(relevant) {
        match (s, r) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    Ok(SelectionReport {
        sensitivity: ratio(tp, tp + fn_),
        specificity: ratio(tn, tn + fp),
        accuracy: (tp + tn) as f64 / selected.len() as f64,
    })
}
