//! Probability calibration of monitored-model scores.
//!
//! The weighted calibrator is fitted on reference data with density-ratio
//! weights, which makes it calibrated under the production distribution
//! when `p(y | x)` is shared between the two. The unweighted calibrator is
//! the same fit with unit weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{fit_monotone_map, MonotoneMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibrationMode {
    Weighted,
    Unweighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibrator {
    map: MonotoneMap,
    mode: CalibrationMode,
}

impl Calibrator {
    pub fn from_map(map: MonotoneMap, mode: CalibrationMode) -> Self {
        Calibrator { map, mode }
    }

    pub fn map(&self) -> &MonotoneMap {
        &self.map
    }

    pub fn mode(&self) -> CalibrationMode {
        self.mode
    }

    /// Calibrated probability for a single score, clamped to the map's
    /// boundary values outside its fitted range.
    pub fn calibrate_one(&self, s: f64) -> f64 {
        self.map.eval(s)
    }

    pub fn calibrate(&self, scores: &[f64]) -> Result<Vec<f64>> {
        scores
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                if (0.0..=1.0).contains(&s) {
                    Ok(self.map.eval(s))
                } else {
                    Err(Error::at_row(i, format!("score {s} is outside [0, 1]")))
                }
            })
            .collect()
    }
}

/// Fits `c(s)` on reference scores and labels with per-row weights.
///
/// When every score is equal the result is the constant weighted mean of
/// the labels.
pub fn fit_weighted_calibrator(scores_ref: &[f64], y_ref: &[u8], weights: &[f64]) -> Result<Calibrator> {
    Ok(Calibrator {
        map: fit_monotone_map(scores_ref, y_ref, weights)?,
        mode: CalibrationMode::Weighted,
    })
}

pub fn fit_unweighted_calibrator(scores_ref: &[f64], y_ref: &[u8]) -> Result<Calibrator> {
    Ok(Calibrator {
        map: fit_monotone_map(scores_ref, y_ref, &vec![1.0; scores_ref.len()])?,
        mode: CalibrationMode::Unweighted,
    })
}

/// Binned calibration error of a calibrator on labelled data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationDiagnostics {
    /// `n_bins + 1` score edges; bin `k` covers `[edges[k], edges[k+1]]`.
    pub bin_edges: Vec<f64>,
    /// Share of total weight in each bin.
    pub bin_probability: Vec<f64>,
    /// Weighted mean of `y - c(s)` in each bin.
    pub bin_error: Vec<f64>,
    /// `sum_k bin_probability[k] * |bin_error[k]|`.
    pub expected_abs_error: f64,
}

/// Equal-frequency binned estimate of the signed per-score calibration
/// error and its probability-weighted absolute sum.
pub fn diagnose_calibration(
    calibrator: &Calibrator,
    scores: &[f64],
    y: &[u8],
    weights: Option<&[f64]>,
    n_bins: usize,
) -> Result<CalibrationDiagnostics> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("no labelled rows to diagnose".into()));
    }
    if scores.len() != y.len() || weights.is_some_and(|w| w.len() != y.len()) {
        return Err(Error::validation("scores, labels and weights differ in length"));
    }
    if n_bins == 0 {
        return Err(Error::validation("n_bins must be at least 1"));
    }
    let unit = vec![1.0; y.len()];
    let w = weights.unwrap_or(&unit);
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::validation("weights must have a positive sum"));
    }
    let cal = calibrator.calibrate(scores)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let n = order.len();
    let n_bins = n_bins.min(n);
    let mut bin_edges = Vec::with_capacity(n_bins + 1);
    let mut bin_probability = Vec::with_capacity(n_bins);
    let mut bin_error = Vec::with_capacity(n_bins);
    let mut expected_abs_error = 0.0;
    bin_edges.push(scores[order[0]]);
    for k in 0..n_bins {
        let rows = &order[k * n / n_bins..(k + 1) * n / n_bins];
        let bw: f64 = rows.iter().map(|&i| w[i]).sum();
        let err = if bw > 0.0 {
            rows.iter()
                .map(|&i| w[i] * (f64::from(y[i]) - cal[i]))
                .sum::<f64>()
                / bw
        } else {
            0.0
        };
        let p = bw / total;
        expected_abs_error += p * err.abs();
        bin_edges.push(scores[*rows.last().expect("bins are non-empty")]);
        bin_probability.push(p);
        bin_error.push(err);
    }
    Ok(CalibrationDiagnostics {
        bin_edges,
        bin_probability,
        bin_error,
        expected_abs_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn calibrated_sample(n: usize, seed: u64) -> (Vec<f64>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y = s.iter().map(|&p| u8::from(rng.random::<f64>() < p)).collect();
        (s, y)
    }

    #[test]
    fn calibrated_scores_give_identity_map() {
        let (s, y) = calibrated_sample(10_000, 21);
        let c = fit_weighted_calibrator(&s, &y, &vec![1.0; s.len()]).unwrap();
        for k in 1..10 {
            let t = k as f64 / 10.0;
            assert!((c.calibrate_one(t) - t).abs() < 0.05);
        }
    }

    #[test]
    fn doubled_positive_weights() {
        // balanced labels at a single score, positives weighted 2
        let s = vec![0.5; 4];
        let y = vec![1, 0, 1, 0];
        let w = vec![2.0, 1.0, 2.0, 1.0];
        let c = fit_weighted_calibrator(&s, &y, &w).unwrap();
        assert!((c.calibrate_one(0.5) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_score_collapses_to_mean() {
        let s = vec![0.7; 5];
        let y = vec![1, 0, 1, 0, 0];
        let c = fit_unweighted_calibrator(&s, &y).unwrap();
        for t in [0.0, 0.3, 0.7, 1.0] {
            assert!((c.calibrate_one(t) - 0.4).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_and_constant_maps() {
        let id = Calibrator::from_map(MonotoneMap::identity(), CalibrationMode::Unweighted);
        assert_eq!(id.calibrate(&[0.3]).unwrap(), vec![0.3]);
        let c = Calibrator::from_map(MonotoneMap::constant(0.4), CalibrationMode::Unweighted);
        assert_eq!(c.calibrate(&[0.0, 0.55, 1.0]).unwrap(), vec![0.4; 3]);
    }

    #[test]
    fn pooled_map_interpolates() {
        let c = fit_unweighted_calibrator(&[0.2, 0.8], &[1, 0]).unwrap();
        assert_eq!(c.calibrate(&[0.5]).unwrap(), vec![0.5]);
    }

    #[test]
    fn out_of_range_score_rejected() {
        let c = Calibrator::from_map(MonotoneMap::identity(), CalibrationMode::Unweighted);
        assert!(matches!(c.calibrate(&[0.2, 1.5]), Err(Error::Validation { row: Some(1), .. })));
    }

    #[test]
    fn fitted_map_has_small_error_in_sample() {
        let (s, y) = calibrated_sample(10_000, 22);
        let c = fit_unweighted_calibrator(&s, &y).unwrap();
        let d = diagnose_calibration(&c, &s, &y, None, 10).unwrap();
        assert!(d.expected_abs_error < 0.02, "eps={}", d.expected_abs_error);
        assert!((d.bin_probability.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_zero_calibrator_error_is_base_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 1000;
        let s: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y: Vec<u8> = (0..n).map(|i| u8::from(i % 10 < 3)).collect();
        let c = Calibrator::from_map(MonotoneMap::constant(0.0), CalibrationMode::Unweighted);
        let d = diagnose_calibration(&c, &s, &y, None, 10).unwrap();
        assert!((d.expected_abs_error - 0.3).abs() < 1e-12);
    }

    #[test]
    fn empty_labels_rejected() {
        let c = Calibrator::from_map(MonotoneMap::identity(), CalibrationMode::Unweighted);
        assert!(diagnose_calibration(&c, &[], &[], None, 10).is_err());
    }

    #[test]
    fn unweighted_equals_unit_weighted() {
        let (s, y) = calibrated_sample(777, 24);
        let a = fit_unweighted_calibrator(&s, &y).unwrap();
        let b = fit_weighted_calibrator(&s, &y, &vec![1.0; s.len()]).unwrap();
        assert_eq!(a.map(), b.map());
    }
}
