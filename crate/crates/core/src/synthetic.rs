//! Reference/production pairs with controllable covariate shift and known
//! `P(y = 1 | x)`.
//!
//! Features are independent Gaussians; the concept is logistic in the
//! features and identical for both periods. The monitored model's score is
//! `logistic(model_logit / temperature)`, so `temperature != 1` miscalibrates
//! it. By default the model logit is the true logit, in which case the ideal
//! calibrator is `c*(s) = logistic(temperature * logit(s))` under any shift.
//! Giving the model its own coefficients makes `P(y | score)` depend on the
//! input distribution, which is where reweighted calibration matters.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{write_dataset, DatasetSchema, Role, ScoredDataset};
use crate::error::{Error, Result};
use crate::estimators::{estimate_auroc, estimate_confusion};
use crate::learners::sigmoid;
use crate::metrics::MetricKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftSpec {
    pub n_features: usize,
    /// Reference feature means; zeros when empty.
    #[serde(default)]
    pub ref_mean: Vec<f64>,
    /// Reference feature standard deviations; ones when empty.
    #[serde(default)]
    pub ref_std: Vec<f64>,
    /// Production mean offset per feature; zeros when empty.
    #[serde(default)]
    pub shift: Vec<f64>,
    /// Production standard-deviation multiplier per feature; ones when empty.
    #[serde(default)]
    pub scale: Vec<f64>,
    /// True concept coefficients.
    pub beta: Vec<f64>,
    #[serde(default)]
    pub intercept: f64,
    #[serde(default = "one")]
    pub temperature: f64,
    /// Monitored-model coefficients; the true concept when absent.
    #[serde(default)]
    pub model_beta: Option<Vec<f64>>,
    #[serde(default)]
    pub model_intercept: Option<f64>,
    pub n_ref: usize,
    pub n_prod: usize,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

fn or_fill(v: &[f64], n: usize, fill: f64) -> Vec<f64> {
    if v.is_empty() {
        vec![fill; n]
    } else {
        v.to_vec()
    }
}

impl ShiftSpec {
    /// A spec with standard-normal reference features, no shift and a
    /// calibrated model.
    pub fn new(beta: Vec<f64>, n_ref: usize, n_prod: usize, seed: u64) -> Self {
        ShiftSpec {
            n_features: beta.len(),
            ref_mean: Vec::new(),
            ref_std: Vec::new(),
            shift: Vec::new(),
            scale: Vec::new(),
            beta,
            intercept: 0.0,
            temperature: 1.0,
            model_beta: None,
            model_intercept: None,
            n_ref,
            n_prod,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.n_features;
        if d == 0 {
            return Err(Error::validation("n_features must be at least 1"));
        }
        let sized = |name: &str, v: &[f64]| {
            if v.is_empty() || v.len() == d {
                Ok(())
            } else {
                Err(Error::validation(format!("{name} has {} entries, expected {d}", v.len())))
            }
        };
        sized("ref_mean", &self.ref_mean)?;
        sized("ref_std", &self.ref_std)?;
        sized("shift", &self.shift)?;
        sized("scale", &self.scale)?;
        if self.beta.len() != d {
            return Err(Error::validation(format!("beta has {} entries, expected {d}", self.beta.len())));
        }
        if let Some(b) = &self.model_beta {
            if b.len() != d {
                return Err(Error::validation(format!("model_beta has {} entries, expected {d}", b.len())));
            }
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::validation("temperature must be positive"));
        }
        if self.ref_std.iter().chain(&self.scale).any(|s| !(*s > 0.0)) {
            return Err(Error::validation("standard deviations and scales must be positive"));
        }
        let all = self
            .ref_mean
            .iter()
            .chain(&self.shift)
            .chain(&self.beta)
            .chain(self.model_beta.iter().flatten())
            .chain([&self.intercept]);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("spec contains a non-finite value"));
        }
        if self.n_ref == 0 || self.n_prod == 0 {
            return Err(Error::validation("n_ref and n_prod must be at least 1"));
        }
        Ok(())
    }

    /// True when the monitored model uses the true concept, so that the
    /// ideal calibrator has the closed form `logistic(temperature * logit(s))`.
    pub fn model_is_concept(&self) -> bool {
        self.model_beta.as_ref().is_none_or(|b| *b == self.beta)
            && self.model_intercept.is_none_or(|b| b == self.intercept)
    }

    fn logit(coef: &[f64], intercept: f64, x: &[f64]) -> f64 {
        intercept + coef.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }

    /// True `P(y = 1 | x)`.
    pub fn true_probability(&self, x: &[f64]) -> f64 {
        sigmoid(Self::logit(&self.beta, self.intercept, x))
    }

    /// Monitored-model score for input `x`.
    pub fn score(&self, x: &[f64]) -> f64 {
        let coef = self.model_beta.as_deref().unwrap_or(&self.beta);
        let b = self.model_intercept.unwrap_or(self.intercept);
        sigmoid(Self::logit(coef, b, x) / self.temperature)
    }

    fn draw_features(&self, role: Role, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        let d = self.n_features;
        let mean = or_fill(&self.ref_mean, d, 0.0);
        let std = or_fill(&self.ref_std, d, 1.0);
        let (shift, scale) = match role {
            Role::Reference => (vec![0.0; d], vec![1.0; d]),
            Role::Production => (or_fill(&self.shift, d, 0.0), or_fill(&self.scale, d, 1.0)),
        };
        for j in 0..d {
            let z: f64 = StandardNormal.sample(rng);
            out.push(mean[j] + shift[j] + std[j] * scale[j] * z);
        }
    }
}

/// Exact conditional probabilities for every generated row.
#[derive(Debug, Clone, PartialEq)]
pub struct Oracle {
    pub temperature: f64,
    pub closed_form: bool,
    pub reference_probability: Vec<f64>,
    pub production_probability: Vec<f64>,
}

impl Oracle {
    /// Ideal calibrator `c*(s)`, available when the monitored model uses
    /// the true concept.
    pub fn calibration(&self, s: f64) -> Option<f64> {
        if !self.closed_form {
            return None;
        }
        let s = s.clamp(1e-300, 1.0 - 1e-16);
        Some(sigmoid(self.temperature * (s / (1.0 - s)).ln()))
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticPair {
    pub reference: ScoredDataset,
    pub production: ScoredDataset,
    pub oracle: Oracle,
}

fn draw_period(spec: &ShiftSpec, role: Role, n: usize, rng: &mut ChaCha8Rng) -> Result<(ScoredDataset, Vec<f64>)> {
    let d = spec.n_features;
    let mut features = Vec::with_capacity(n * d);
    let mut scores = Vec::with_capacity(n);
    let mut preds = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut probs = Vec::with_capacity(n);
    for i in 0..n {
        spec.draw_features(role, rng, &mut features);
        let x = &features[i * d..];
        let p = spec.true_probability(x);
        let s = spec.score(x);
        let u: f64 = rng.random();
        labels.push(u8::from(u < p));
        scores.push(s);
        preds.push(u8::from(s >= 0.5));
        probs.push(p);
    }
    let ds = ScoredDataset::new(features, d, scores, preds, Some(labels), role)?;
    Ok((ds, probs))
}

/// Draws a labelled reference/production pair from `spec`.
pub fn generate(spec: &ShiftSpec) -> Result<SyntheticPair> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (reference, reference_probability) = draw_period(spec, Role::Reference, spec.n_ref, &mut rng)?;
    let (production, production_probability) = draw_period(spec, Role::Production, spec.n_prod, &mut rng)?;
    Ok(SyntheticPair {
        reference,
        production,
        oracle: Oracle {
            temperature: spec.temperature,
            closed_form: spec.model_is_concept(),
            reference_probability,
            production_probability,
        },
    })
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

const MC_BATCHES: usize = 50;

/// Population value of `kind` for the monitored model on the production
/// distribution, by Monte Carlo over inputs with labels integrated out
/// through the true `P(y = 1 | x)`.
///
/// Accuracy is an average of per-row expectations and gets the plain
/// standard error; the ratio metrics use batch means.
pub fn true_performance(spec: &ShiftSpec, kind: MetricKind, n_mc: usize, seed: u64) -> Result<McEstimate> {
    spec.validate()?;
    if n_mc < 10_000 {
        return Err(Error::validation("n_mc must be at least 10000"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.n_features;
    let mut x = Vec::with_capacity(d);
    let mut probs = Vec::with_capacity(n_mc);
    let mut scores = Vec::with_capacity(n_mc);
    let mut preds = Vec::with_capacity(n_mc);
    for _ in 0..n_mc {
        x.clear();
        spec.draw_features(Role::Production, &mut rng, &mut x);
        let s = spec.score(&x);
        probs.push(spec.true_probability(&x));
        scores.push(s);
        preds.push(u8::from(s >= 0.5));
    }
    let metric = |p: &[f64], g: &[u8], s: &[f64]| -> Result<f64> {
        match kind {
            MetricKind::Auroc => estimate_auroc(p, s),
            _ => estimate_confusion(p, g)?.metric(kind),
        }
    };
    if kind == MetricKind::Accuracy {
        let per_row: Vec<f64> = probs
            .iter()
            .zip(&preds)
            .map(|(&p, &g)| if g == 1 { p } else { 1.0 - p })
            .collect();
        let n = n_mc as f64;
        let mean = per_row.iter().sum::<f64>() / n;
        let var = per_row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        return Ok(McEstimate {
            value: mean,
            std_error: (var / n).sqrt(),
        });
    }
    let value = metric(&probs, &preds, &scores)?;
    let size = n_mc / MC_BATCHES;
    let batch: Vec<f64> = (0..MC_BATCHES)
        .map(|b| {
            let r = b * size..(b + 1) * size;
            metric(&probs[r.clone()], &preds[r.clone()], &scores[r])
        })
        .collect::<Result<_>>()?;
    let bm = batch.iter().sum::<f64>() / MC_BATCHES as f64;
    let bv = batch.iter().map(|v| (v - bm) * (v - bm)).sum::<f64>() / (MC_BATCHES as f64 - 1.0);
    Ok(McEstimate {
        value,
        std_error: (bv / MC_BATCHES as f64).sqrt(),
    })
}

/// Column layout used for generated files: `x1..xd, score, prediction, label`.
pub fn schema_for(n_features: usize) -> DatasetSchema {
    DatasetSchema {
        feature_columns: (1..=n_features).map(|j| format!("x{j}")).collect(),
        score_column: DatasetSchema::DEFAULT_SCORE.into(),
        prediction_column: DatasetSchema::DEFAULT_PREDICTION.into(),
        label_column: Some(DatasetSchema::DEFAULT_LABEL.into()),
    }
}

/// Writes `reference.csv`, `production.csv` and `oracle.csv` (true
/// `P(y = 1 | x)` per row) into `dir`.
pub fn write_pair(dir: &Path, pair: &SyntheticPair) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let schema = schema_for(pair.reference.n_features());
    write_dataset(&dir.join("reference.csv"), &pair.reference, &schema)?;
    write_dataset(&dir.join("production.csv"), &pair.production, &schema)?;
    let path = dir.join("oracle.csv");
    let io = |e| Error::io(&path, e);
    let mut out = BufWriter::new(File::create(&path).map_err(io)?);
    writeln!(out, "role,row,true_probability").map_err(io)?;
    for (role, probs) in [
        ("reference", &pair.oracle.reference_probability),
        ("production", &pair.oracle.production_probability),
    ] {
        for (i, p) in probs.iter().enumerate() {
            writeln!(out, "{role},{i},{p}").map_err(io)?;
        }
    }
    out.flush().map_err(io)
}
