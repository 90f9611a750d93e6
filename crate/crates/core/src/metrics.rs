//! Realized performance metrics, including weighted variants.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Accuracy,
    F1,
    Precision,
    Recall,
    Auroc,
}

impl MetricKind {
    pub const ALL: [MetricKind; 5] = [
        MetricKind::Accuracy,
        MetricKind::F1,
        MetricKind::Precision,
        MetricKind::Recall,
        MetricKind::Auroc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Accuracy => "accuracy",
            MetricKind::F1 => "f1",
            MetricKind::Precision => "precision",
            MetricKind::Recall => "recall",
            MetricKind::Auroc => "auroc",
        }
    }

    /// Every supported metric takes values in `[0, 1]`.
    pub fn clip(self, v: f64) -> f64 {
        v.clamp(0.0, 1.0)
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown metric `{s}`")))
    }
}

/// Confusion-matrix elements as rates: the four cells sum to one.
///
/// Positive class is prediction / label value 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: f64,
    pub fp: f64,
    pub tn: f64,
    pub fn_: f64,
}

impl Confusion {
    /// Empirical confusion rates from counts.
    pub fn from_labels(labels: &[u8], predictions: &[u8]) -> Result<Self> {
        check_same_len(labels.len(), predictions.len())?;
        let mut counts = [0u64; 4];
        for (&y, &g) in labels.iter().zip(predictions) {
            counts[usize::from(y) * 2 + usize::from(g)] += 1;
        }
        let n = labels.len() as f64;
        Ok(Confusion {
            tn: counts[0] as f64 / n,
            fp: counts[1] as f64 / n,
            fn_: counts[2] as f64 / n,
            tp: counts[3] as f64 / n,
        })
    }

    /// Weighted confusion rates, normalised by the total weight.
    pub fn weighted(labels: &[u8], predictions: &[u8], weights: &[f64]) -> Result<Self> {
        check_same_len(labels.len(), predictions.len())?;
        check_same_len(labels.len(), weights.len())?;
        let mut cells = [0.0f64; 4];
        for ((&y, &g), &w) in labels.iter().zip(predictions).zip(weights) {
            cells[usize::from(y) * 2 + usize::from(g)] += w;
        }
        let total: f64 = cells.iter().sum();
        if total <= 0.0 {
            return Err(Error::validation("weights must have a positive sum"));
        }
        Ok(Confusion {
            tn: cells[0] / total,
            fp: cells[1] / total,
            fn_: cells[2] / total,
            tp: cells[3] / total,
        })
    }

    pub fn accuracy(&self) -> f64 {
        self.tp + self.tn
    }

    /// Precision; 0 when nothing is predicted positive.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    /// Recall; 0 when there are no positives.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `2tp / (2tp + fp + fn)`; 0 when there are neither predicted nor
    /// actual positives.
    pub fn f1(&self) -> f64 {
        ratio(2.0 * self.tp, 2.0 * self.tp + self.fp + self.fn_)
    }

    /// True when `kind` hit a zero denominator and was defined as 0.
    pub fn is_degenerate(&self, kind: MetricKind) -> bool {
        match kind {
            MetricKind::Precision => self.tp + self.fp == 0.0,
            MetricKind::Recall => self.tp + self.fn_ == 0.0,
            MetricKind::F1 => 2.0 * self.tp + self.fp + self.fn_ == 0.0,
            _ => false,
        }
    }

    /// Value of a confusion-based metric. AUROC is not confusion-based.
    pub fn metric(&self, kind: MetricKind) -> Result<f64> {
        match kind {
            MetricKind::Accuracy => Ok(self.accuracy()),
            MetricKind::F1 => Ok(self.f1()),
            MetricKind::Precision => Ok(self.precision()),
            MetricKind::Recall => Ok(self.recall()),
            MetricKind::Auroc => Err(Error::UndefinedMetric(
                "auroc is not a confusion-matrix metric".into(),
            )),
        }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn check_same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::validation(format!("length mismatch: {a} vs {b}")));
    }
    if a == 0 {
        return Err(Error::EmptyInput("no observations".into()));
    }
    Ok(())
}

/// Area under the ROC curve from the Mann-Whitney rank statistic, with tied
/// scores counted as one half.
pub fn auroc_rank(labels: &[u8], scores: &[f64]) -> Result<f64> {
    check_same_len(labels.len(), scores.len())?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let positives = labels.iter().filter(|&&y| y == 1).count() as f64;
    let negatives = labels.len() as f64 - positives;
    if positives == 0.0 || negatives == 0.0 {
        return Err(Error::UndefinedMetric("auroc needs both classes".into()));
    }
    // twice the sum of positive midranks, kept integral
    let mut twice_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1, midrank = (i + j + 2) / 2
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        twice_rank_sum += pos_in_group * (i + j + 2) as f64;
        i = j + 1;
    }
    let twice_u = twice_rank_sum - positives * (positives + 1.0);
    Ok(twice_u / (2.0 * positives * negatives))
}

/// Trapezoidal area under the ROC polyline traced by sweeping a threshold
/// `t` down through the distinct scores, where each row contributes
/// `pos_weight` to the true-positive mass and `neg_weight` to the
/// false-positive mass of every threshold `t <= score`.
///
/// The polyline is anchored at (0, 0) and (1, 1). Accumulation is kept in
/// unnormalised form so that integral weights give an exact result.
pub fn weighted_roc_auc(scores: &[f64], pos_weight: &[f64], neg_weight: &[f64]) -> Result<f64> {
    check_same_len(scores.len(), pos_weight.len())?;
    check_same_len(scores.len(), neg_weight.len())?;
    let total_pos: f64 = pos_weight.iter().sum();
    let total_neg: f64 = neg_weight.iter().sum();
    if !(total_pos > 0.0) || !(total_neg > 0.0) {
        return Err(Error::UndefinedMetric(
            "roc curve needs positive mass on both classes".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut twice_area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let (tp_prev, fp_prev) = (tp, fp);
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            tp += pos_weight[order[i]];
            fp += neg_weight[order[i]];
            i += 1;
        }
        twice_area += (fp - fp_prev) * (tp + tp_prev);
    }
    // anchor at (1, 1): closes any rounding gap in the cumulative sums
    twice_area += (total_neg - fp) * (total_pos + tp);
    Ok(twice_area / (2.0 * total_pos * total_neg))
}

/// Realized metric of binary `predictions` (and raw `scores`, for AUROC)
/// against `labels`.
///
/// Precision, recall and F1 with a zero denominator are defined as 0; use
/// [`Confusion::is_degenerate`] to detect that case.
pub fn realized_metric(kind: MetricKind, labels: &[u8], predictions: &[u8], scores: &[f64]) -> Result<f64> {
    match kind {
        MetricKind::Auroc => auroc_rank(labels, scores),
        MetricKind::Accuracy => {
            check_same_len(labels.len(), predictions.len())?;
            let correct = labels.iter().zip(predictions).filter(|(y, g)| y == g).count();
            Ok(correct as f64 / labels.len() as f64)
        }
        _ => Confusion::from_labels(labels, predictions)?.metric(kind),
    }
}

/// Realized metric with per-row weights (importance weighting).
pub fn weighted_metric(
    kind: MetricKind,
    labels: &[u8],
    predictions: &[u8],
    scores: &[f64],
    weights: &[f64],
) -> Result<f64> {
    match kind {
        MetricKind::Auroc => {
            let pos: Vec<f64> = labels.iter().zip(weights).map(|(&y, &w)| w * f64::from(y)).collect();
            let neg: Vec<f64> = labels
                .iter()
                .zip(weights)
                .map(|(&y, &w)| w * f64::from(1 - y))
                .collect();
            weighted_roc_auc(scores, &pos, &neg)
        }
        MetricKind::Accuracy => {
            check_same_len(labels.len(), weights.len())?;
            let total: f64 = weights.iter().sum();
            if total <= 0.0 {
                return Err(Error::validation("weights must have a positive sum"));
            }
            let correct: f64 = labels
                .iter()
                .zip(predictions)
                .zip(weights)
                .filter(|((y, g), _)| y == g)
                .map(|(_, w)| w)
                .sum();
            Ok(correct / total)
        }
        _ => Confusion::weighted(labels, predictions, weights)?.metric(kind),
    }
}

/// Maximum confidence: `s` when `s >= 0.5`, else `1 - s`.
pub fn max_confidence(s: f64) -> f64 {
    if s >= 0.5 {
        s
    } else {
        1.0 - s
    }
}
