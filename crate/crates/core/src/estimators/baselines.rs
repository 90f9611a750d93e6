//! Reference estimation methods: ATC, DoC, RT-mod and importance weighting.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{split_chunks, DataView};
use crate::density_ratio::{fit_dre, DensityRatioModel, DreConfig};
use crate::error::{Error, Result};
use crate::learners::{fit_line, fit_prob_classifier, sigmoid, ClassifierConfig, LinearModel};
use crate::metrics::{auroc_rank, max_confidence, realized_metric, weighted_metric, MetricKind};

use super::{Estimate, Warning};

/// Effective sample size below which importance-weighted estimates are
/// flagged.
pub const MIN_EFFECTIVE_SAMPLE_SIZE: f64 = 10.0;

fn reference_metric(kind: MetricKind, reference: &DataView<'_>) -> Result<f64> {
    let labels = reference.require_labels()?;
    realized_metric(kind, labels, reference.predictions(), reference.scores())
}

// ---------------------------------------------------------------- ATC

/// Average threshold confidence: a threshold on maximum confidence whose
/// exceedance fraction on reference data equals the reference metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtcFit {
    pub kind: MetricKind,
    pub reference_value: f64,
    /// Chunk rows with maximum confidence strictly above this count as hits.
    pub threshold: f64,
}

/// Picks, among all distinct reference maximum-confidence values (and a
/// threshold below all of them), the one whose strict exceedance fraction
/// on reference is closest to the reference metric value.
pub fn atc_fit(kind: MetricKind, reference: &DataView<'_>) -> Result<AtcFit> {
    let reference_value = reference_metric(kind, reference)?;
    let mut mc: Vec<f64> = reference.scores().iter().map(|&s| max_confidence(s)).collect();
    mc.sort_by(f64::total_cmp);
    let n = mc.len() as f64;
    let mut best = (f64::NEG_INFINITY, (1.0 - reference_value).abs());
    let mut i = 0;
    while i < mc.len() {
        let v = mc[i];
        while i < mc.len() && mc[i] == v {
            i += 1;
        }
        let above = (mc.len() - i) as f64 / n;
        let gap = (above - reference_value).abs();
        if gap < best.1 {
            best = (v, gap);
        }
    }
    Ok(AtcFit {
        kind,
        reference_value,
        threshold: best.0,
    })
}

impl AtcFit {
    pub fn estimate(&self, chunk_scores: &[f64]) -> Result<Estimate> {
        if chunk_scores.is_empty() {
            return Err(Error::EmptyInput("empty chunk".into()));
        }
        let above = chunk_scores
            .iter()
            .filter(|&&s| max_confidence(s) > self.threshold)
            .count();
        Ok(Estimate::new(above as f64 / chunk_scores.len() as f64))
    }
}

// ---------------------------------------------------------------- DoC

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DocConfig {
    pub n_resamples: usize,
    pub resample_size: usize,
    /// Tilt strengths are drawn uniformly from `[-lambda_range, lambda_range]`.
    pub lambda_range: f64,
}

impl Default for DocConfig {
    fn default() -> Self {
        DocConfig {
            n_resamples: 50,
            resample_size: 2000,
            lambda_range: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DocModel {
    Linear(LinearModel),
    /// The line could not be fitted; estimates fall back to the reference
    /// value.
    Fallback(String),
}

/// Difference of confidence: a line from the change in mean maximum
/// confidence to the change in the metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocFit {
    pub kind: MetricKind,
    pub reference_value: f64,
    pub reference_mean_mc: f64,
    pub model: DocModel,
    /// `(mean-MC difference, metric difference)` per usable resample.
    pub pairs: Vec<(f64, f64)>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Fits DoC from score-tilted resamples of the reference data.
///
/// Each resample draws `resample_size` rows with replacement, row `i`
/// having probability proportional to `logistic(lambda * (MC_i - median MC))`
/// with `lambda` uniform in `[-lambda_range, lambda_range]`.
pub fn doc_fit(kind: MetricKind, reference: &DataView<'_>, config: &DocConfig, seed: u64) -> Result<DocFit> {
    let labels = reference.require_labels()?;
    let reference_value = reference_metric(kind, reference)?;
    let mc: Vec<f64> = reference.scores().iter().map(|&s| max_confidence(s)).collect();
    let reference_mean_mc = mc.iter().sum::<f64>() / mc.len() as f64;
    let mut sorted = mc.clone();
    sorted.sort_by(f64::total_cmp);
    let med = median(&sorted);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(config.n_resamples);
    let size = config.resample_size.max(1);
    let mut idx = vec![0usize; size];
    for _ in 0..config.n_resamples {
        let lambda = if config.lambda_range > 0.0 {
            rng.random_range(-config.lambda_range..=config.lambda_range)
        } else {
            0.0
        };
        let probs: Vec<f64> = mc.iter().map(|&m| sigmoid(lambda * (m - med))).collect();
        let dist = WeightedIndex::new(&probs).map_err(|e| Error::validation(e.to_string()))?;
        for slot in idx.iter_mut() {
            *slot = dist.sample(&mut rng);
        }
        let l: Vec<u8> = idx.iter().map(|&i| labels[i]).collect();
        let g: Vec<u8> = idx.iter().map(|&i| reference.predictions()[i]).collect();
        let s: Vec<f64> = idx.iter().map(|&i| reference.scores()[i]).collect();
        let Ok(m) = realized_metric(kind, &l, &g, &s) else {
            continue;
        };
        let mean_mc = idx.iter().map(|&i| mc[i]).sum::<f64>() / size as f64;
        pairs.push((mean_mc - reference_mean_mc, m - reference_value));
    }
    let (u, v): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let model = match fit_line(&u, &v) {
        Ok(line) => DocModel::Linear(line),
        Err(Error::SingularFit(why)) => DocModel::Fallback(why),
        Err(e) => return Err(e),
    };
    Ok(DocFit {
        kind,
        reference_value,
        reference_mean_mc,
        model,
        pairs,
    })
}

impl DocFit {
    pub fn estimate(&self, chunk_scores: &[f64]) -> Result<Estimate> {
        if chunk_scores.is_empty() {
            return Err(Error::EmptyInput("empty chunk".into()));
        }
        match &self.model {
            DocModel::Linear(line) => {
                let mean_mc =
                    chunk_scores.iter().map(|&s| max_confidence(s)).sum::<f64>() / chunk_scores.len() as f64;
                let v = self.reference_value + line.predict(mean_mc - self.reference_mean_mc);
                Ok(Estimate::new(self.kind.clip(v)))
            }
            DocModel::Fallback(why) => Ok(Estimate::with_warning(
                self.reference_value,
                Warning::FallbackToTestSet(format!("doc: {why}")),
            )),
        }
    }
}

// ---------------------------------------------------------------- RT-mod

/// Reverse-model estimates of `kinds`: a classifier is trained on the chunk
/// inputs with the monitored model's predictions as targets, then scored on
/// the reference inputs against the reference labels.
pub fn reverse_raw(
    kinds: &[MetricKind],
    chunk: &DataView<'_>,
    reference: &DataView<'_>,
    config: &ClassifierConfig,
) -> Result<Vec<Result<f64>>> {
    let labels = reference.require_labels()?;
    let reverse = fit_prob_classifier(
        chunk.features(),
        chunk.n_features(),
        chunk.predictions(),
        None,
        config,
    )?;
    let probs = reverse.predict_proba_checked(reference.features(), reference.n_features())?;
    let preds: Vec<u8> = probs.iter().map(|&p| u8::from(p >= 0.5)).collect();
    Ok(kinds
        .iter()
        .map(|&kind| match kind {
            MetricKind::Auroc => auroc_rank(labels, &probs),
            _ => realized_metric(kind, labels, &preds, reference.scores()),
        })
        .collect())
}

/// Per-kind additive correction for the reverse-testing estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtModFit {
    pub kinds: Vec<MetricKind>,
    /// `Ok(constant)` or the reason no constant could be estimated.
    pub constants: Vec<std::result::Result<f64, String>>,
    /// `(realized, raw reverse estimate)` per usable reference pseudo-chunk.
    pub pairs: Vec<Vec<(f64, f64)>>,
    pub reference_values: Vec<f64>,
}

/// Fits RT-mod constants: the mean, over disjoint chunk-sized pieces of the
/// reference data, of the realized metric minus the raw reverse estimate.
pub fn rtmod_fit(
    kinds: &[MetricKind],
    reference: &DataView<'_>,
    chunk_size: usize,
    config: &ClassifierConfig,
) -> Result<RtModFit> {
    let labels = reference.require_labels()?;
    let reference_values = kinds
        .iter()
        .map(|&k| reference_metric(k, reference))
        .collect::<Result<Vec<_>>>()?;
    let size = chunk_size.min(reference.n_rows()).max(1);
    let pieces = split_chunks(*reference, size, size)?;
    let mut pairs = vec![Vec::new(); kinds.len()];
    for piece in &pieces {
        let view = piece.view();
        let Ok(raw) = reverse_raw(kinds, &view, reference, config) else {
            continue;
        };
        let piece_labels = &labels[piece.rows()];
        for (k, (&kind, raw)) in kinds.iter().zip(raw).enumerate() {
            let realized = realized_metric(kind, piece_labels, view.predictions(), view.scores());
            if let (Ok(m), Ok(r)) = (realized, raw) {
                pairs[k].push((m, r));
            }
        }
    }
    let constants = pairs
        .iter()
        .map(|p| {
            if p.is_empty() {
                Err("no reference piece supports a reverse model".to_string())
            } else {
                Ok(p.iter().map(|(m, r)| m - r).sum::<f64>() / p.len() as f64)
            }
        })
        .collect();
    Ok(RtModFit {
        kinds: kinds.to_vec(),
        constants,
        pairs,
        reference_values,
    })
}

impl RtModFit {
    fn position(&self, kind: MetricKind) -> Result<usize> {
        self.kinds
            .iter()
            .position(|&k| k == kind)
            .ok_or_else(|| Error::Config(format!("rt-mod was not fitted for {kind}")))
    }

    pub fn constant(&self, kind: MetricKind) -> Result<std::result::Result<f64, String>> {
        Ok(self.constants[self.position(kind)?].clone())
    }

    /// Applies the correction to a raw reverse estimate (or falls back to
    /// the reference value when either is unavailable).
    pub fn correct(&self, kind: MetricKind, raw: std::result::Result<f64, String>) -> Result<Estimate> {
        let k = self.position(kind)?;
        let combined = self.constants[k].clone().and_then(|c| raw.map(|r| r + c));
        match combined {
            Ok(v) => Ok(Estimate::new(kind.clip(v))),
            Err(why) => Ok(Estimate::with_warning(
                self.reference_values[k],
                Warning::FallbackToTestSet(format!("rt-mod: {why}")),
            )),
        }
    }

    pub fn estimate(&self, kind: MetricKind, chunk: &DataView<'_>, reference: &DataView<'_>, config: &ClassifierConfig) -> Result<Estimate> {
        let raw = match reverse_raw(&[kind], chunk, reference, config) {
            Ok(mut v) => v.pop().expect("one kind requested").map_err(|e| e.to_string()),
            Err(e) => Err(e.to_string()),
        };
        self.correct(kind, raw)
    }
}

// ---------------------------------------------------------------- IW

/// Weighted realized metric on reference data, given fitted density ratios.
pub fn iw_from_model(kind: MetricKind, reference: &DataView<'_>, dre: &DensityRatioModel) -> Result<Estimate> {
    let labels = reference.require_labels()?;
    let weights = dre.estimate_weights(reference.features())?;
    let value = weighted_metric(kind, labels, reference.predictions(), reference.scores(), &weights.values)?;
    let mut e = Estimate::new(value);
    let ess = weights.effective_sample_size();
    if ess < MIN_EFFECTIVE_SAMPLE_SIZE {
        e.warnings.push(Warning::LowEffectiveSampleSize(ess));
    }
    if weights.clipped_fraction > 0.0 {
        e.warnings.push(Warning::ClippedWeights(weights.clipped_fraction));
    }
    if dre.coverage_warning() {
        e.warnings.push(Warning::Coverage(dre.prod_uncovered_fraction()));
    }
    Ok(e)
}

/// Importance weighting: density ratios between reference and chunk inputs
/// reweight the realized reference metric.
pub fn iw_estimate(
    kind: MetricKind,
    reference: &DataView<'_>,
    chunk: &DataView<'_>,
    config: &DreConfig,
    seed: u64,
) -> Result<Estimate> {
    if reference.n_features() != chunk.n_features() {
        return Err(Error::DimensionMismatch {
            expected: reference.n_features(),
            found: chunk.n_features(),
        });
    }
    let dre = fit_dre(reference.features(), chunk.features(), chunk.n_features(), config, seed)?;
    iw_from_model(kind, reference, &dre)
}
