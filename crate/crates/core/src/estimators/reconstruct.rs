//! Metric reconstruction from calibrated probabilities.
//!
//! Given `c = P(y = 1 | score)` for every production row, accuracy is the
//! mean of `c * m(g, 1) + (1 - c) * m(g, 0)`. Confusion-based metrics are
//! plug-in ratios of expected confusion elements, and AUROC is the area
//! under the ROC curve traced by expected TPR/FPR over score thresholds.

use crate::error::{Error, Result};
use crate::metrics::{weighted_roc_auc, Confusion, MetricKind};

use super::{Estimate, Warning};

fn check(cal_probs: &[f64], other: &[impl Sized]) -> Result<()> {
    if cal_probs.is_empty() {
        return Err(Error::EmptyInput("no calibrated probabilities".into()));
    }
    if cal_probs.len() != other.len() {
        return Err(Error::validation(format!(
            "{} calibrated probabilities for {} rows",
            cal_probs.len(),
            other.len()
        )));
    }
    if let Some(c) = cal_probs.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(Error::validation(format!("calibrated probability {c} is outside [0, 1]")));
    }
    Ok(())
}

/// Expected accuracy: mean over rows of `c * [g = 1] + (1 - c) * [g = 0]`.
pub fn expected_accuracy(cal_probs: &[f64], predictions: &[u8]) -> Result<f64> {
    check(cal_probs, predictions)?;
    let sum: f64 = cal_probs
        .iter()
        .zip(predictions)
        .map(|(&c, &g)| {
            let (hit_if_pos, hit_if_neg) = if g == 1 { (1.0, 0.0) } else { (0.0, 1.0) };
            c * hit_if_pos + (1.0 - c) * hit_if_neg
        })
        .sum();
    Ok(sum / cal_probs.len() as f64)
}

/// Expected confusion-matrix rates.
///
/// `tp = mean(c g)`, `fp = mean((1 - c) g)`, `fn = mean(c (1 - g))`,
/// `tn = mean((1 - c)(1 - g))`.
pub fn estimate_confusion(cal_probs: &[f64], predictions: &[u8]) -> Result<Confusion> {
    check(cal_probs, predictions)?;
    let (mut tp, mut fp, mut fn_, mut tn) = (0.0, 0.0, 0.0, 0.0);
    for (&c, &g) in cal_probs.iter().zip(predictions) {
        let g = f64::from(g);
        tp += c * g;
        fp += (1.0 - c) * g;
        fn_ += c * (1.0 - g);
        tn += (1.0 - c) * (1.0 - g);
    }
    let n = cal_probs.len() as f64;
    Ok(Confusion {
        tp: tp / n,
        fp: fp / n,
        tn: tn / n,
        fn_: fn_ / n,
    })
}

/// Expected AUROC from the threshold sweep `h_t(s) = [s >= t]` over every
/// distinct score, with `TPR(t) = sum_{s >= t} c / sum c` and
/// `FPR(t) = sum_{s >= t} (1 - c) / sum (1 - c)`.
pub fn estimate_auroc(cal_probs: &[f64], scores: &[f64]) -> Result<f64> {
    check(cal_probs, scores)?;
    let neg: Vec<f64> = cal_probs.iter().map(|c| 1.0 - c).collect();
    weighted_roc_auc(scores, cal_probs, &neg)
}

/// Reconstructs `kind` from calibrated probabilities of the monitored
/// model's positive class.
pub fn estimate_from_calibrated(
    kind: MetricKind,
    cal_probs: &[f64],
    predictions: &[u8],
    scores: &[f64],
) -> Result<Estimate> {
    match kind {
        MetricKind::Accuracy => Ok(Estimate::new(expected_accuracy(cal_probs, predictions)?)),
        MetricKind::Auroc => Ok(Estimate::new(estimate_auroc(cal_probs, scores)?)),
        _ => {
            let confusion = estimate_confusion(cal_probs, predictions)?;
            let mut e = Estimate::new(confusion.metric(kind)?);
            if confusion.is_degenerate(kind) {
                e.warnings.push(Warning::DegenerateMetric);
            }
            Ok(e)
        }
    }
}
