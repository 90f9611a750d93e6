//! Discriminative density-ratio estimation between reference and
//! production inputs.
//!
//! A classifier is trained to tell production rows (`z = 1`) from reference
//! rows (`z = 0`); its odds, rescaled by the sample-size ratio, estimate
//! `p_prod(x) / p_ref(x)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{fit_prob_classifier, ClassifierConfig, ProbClassifier};
use crate::metrics::weighted_roc_auc;

/// DRE probability above which a production row is considered to lie in a
/// region the reference data barely covers.
pub const COVERAGE_PROB_THRESHOLD: f64 = 0.99;
/// Fraction of production rows above [`COVERAGE_PROB_THRESHOLD`] that
/// triggers a coverage warning.
pub const COVERAGE_WARN_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DreConfig {
    pub classifier: ClassifierConfig,
    /// Upper bound applied to every estimated weight.
    pub weight_clip: f64,
}

impl Default for DreConfig {
    fn default() -> Self {
        DreConfig {
            classifier: ClassifierConfig::default(),
            weight_clip: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRatioModel {
    classifier: ProbClassifier,
    n_ref: usize,
    n_prod: usize,
    weight_clip: f64,
    n_features: usize,
    /// Fraction of production rows with DRE probability above
    /// [`COVERAGE_PROB_THRESHOLD`].
    prod_uncovered_fraction: f64,
    /// In-sample AUROC of the reference-vs-production classifier.
    discrimination_auroc: f64,
}

/// Weights estimated for a set of rows, with clipping diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub values: Vec<f64>,
    /// Fraction of rows whose raw ratio exceeded the clip and was capped.
    pub clipped_fraction: f64,
}

impl Weights {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Kish effective sample size `(sum w)^2 / sum w^2`.
    pub fn effective_sample_size(&self) -> f64 {
        let s: f64 = self.values.iter().sum();
        let s2: f64 = self.values.iter().map(|w| w * w).sum();
        s * s / s2
    }
}

/// `(n_ref / n_prod) * p / (1 - p)`.
pub fn ratio_from_probability(p: f64, n_ref: usize, n_prod: usize) -> f64 {
    (n_ref as f64 / n_prod as f64) * p / (1.0 - p)
}

/// Fits the reference-vs-production classifier on the stacked inputs.
///
/// `seed` is accepted for learners with randomised fitting; the default
/// logistic learner is deterministic and ignores it.
pub fn fit_dre(
    x_ref: &[f64],
    x_prod: &[f64],
    n_features: usize,
    config: &DreConfig,
    _seed: u64,
) -> Result<DensityRatioModel> {
    if x_ref.is_empty() || x_prod.is_empty() {
        return Err(Error::EmptyInput("density-ratio inputs must be non-empty".into()));
    }
    if n_features == 0 || !x_ref.len().is_multiple_of(n_features) || !x_prod.len().is_multiple_of(n_features) {
        return Err(Error::validation(format!(
            "reference ({} values) and production ({} values) do not share {n_features} columns",
            x_ref.len(),
            x_prod.len()
        )));
    }
    if !(config.weight_clip > 0.0) {
        return Err(Error::Config("weight_clip must be positive".into()));
    }
    let n_ref = x_ref.len() / n_features;
    let n_prod = x_prod.len() / n_features;
    let mut x = Vec::with_capacity(x_ref.len() + x_prod.len());
    x.extend_from_slice(x_ref);
    x.extend_from_slice(x_prod);
    let mut z = vec![0u8; n_ref];
    z.resize(n_ref + n_prod, 1);
    let classifier = fit_prob_classifier(&x, n_features, &z, None, &config.classifier)?;

    let p = classifier.predict_proba(&x)?;
    let uncovered = p[n_ref..].iter().filter(|&&v| v > COVERAGE_PROB_THRESHOLD).count();
    let pos: Vec<f64> = z.iter().map(|&v| f64::from(v)).collect();
    let neg: Vec<f64> = z.iter().map(|&v| f64::from(1 - v)).collect();
    let discrimination_auroc = weighted_roc_auc(&p, &pos, &neg)?;

    Ok(DensityRatioModel {
        classifier,
        n_ref,
        n_prod,
        weight_clip: config.weight_clip,
        n_features,
        prod_uncovered_fraction: uncovered as f64 / n_prod as f64,
        discrimination_auroc,
    })
}

impl DensityRatioModel {
    pub fn n_ref(&self) -> usize {
        self.n_ref
    }

    pub fn n_prod(&self) -> usize {
        self.n_prod
    }

    pub fn weight_clip(&self) -> f64 {
        self.weight_clip
    }

    pub fn classifier(&self) -> &ProbClassifier {
        &self.classifier
    }

    pub fn discrimination_auroc(&self) -> f64 {
        self.discrimination_auroc
    }

    pub fn prod_uncovered_fraction(&self) -> f64 {
        self.prod_uncovered_fraction
    }

    /// True when more than 1% of production rows fall where the reference
    /// data gives almost no support.
    pub fn coverage_warning(&self) -> bool {
        self.prod_uncovered_fraction > COVERAGE_WARN_FRACTION
    }

    /// Clipped DRE probabilities `p(z = 1 | x)`.
    pub fn production_probability(&self, x: &[f64]) -> Result<Vec<f64>> {
        if !x.len().is_multiple_of(self.n_features) {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.len() % self.n_features,
            });
        }
        self.classifier.predict_proba(x)
    }

    /// Per-row density ratios, capped at the configured clip.
    pub fn estimate_weights(&self, x: &[f64]) -> Result<Weights> {
        let p = self.production_probability(x)?;
        let mut clipped = 0usize;
        let values: Vec<f64> = p
            .iter()
            .map(|&pi| {
                let w = ratio_from_probability(pi, self.n_ref, self.n_prod);
                if w > self.weight_clip {
                    clipped += 1;
                    self.weight_clip
                } else {
                    w
                }
            })
            .collect();
        let n = values.len().max(1);
        Ok(Weights {
            values,
            clipped_fraction: clipped as f64 / n as f64,
        })
    }
}
