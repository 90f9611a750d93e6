//! Evaluation harness: bootstrap standard errors, case filtering,
//! SE-scaled error summaries (MASTE / RMSSTE), rolling change buckets and
//! the sample-size sweep.
//!
//! MASTE for a method and metric is
//! `sum_i sum_j |m_ij - m^_ij| / SE_i` divided by the number of points,
//! where `SE_i` is the bootstrap standard error of the metric for a
//! reference sample of chunk size. RMSSTE is the root of the squared analog.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{split_chunks, DataView, ScoredDataset};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorConfig, EstimatorSuite, Method, MethodEstimate};
use crate::metrics::{realized_metric, MetricKind};
use crate::seed::derive_seed;

pub const DEFAULT_N_BOOT: usize = 500;
pub const DEFAULT_BUCKET_WIDTH: f64 = 2.0;
pub const DEFAULT_SWEEP_SIZES: [usize; 6] = [100, 200, 500, 1000, 2000, 5000];
pub const DEFAULT_SWEEP_STEP: usize = 1000;
/// Minimum number of chunk-sized blocks of reference data for a case.
pub const MIN_REFERENCE_CHUNKS: usize = 3;

const MAX_UNDEFINED_FRACTION: f64 = 0.1;
const BOOTSTRAP_STREAM: u64 = 0xb007;

/// Standard deviation (divisor `n_boot`) of the realized metric over
/// `n_boot` with-replacement resamples of `sample_size` reference rows.
pub fn bootstrap_se(
    reference: &DataView<'_>,
    kind: MetricKind,
    sample_size: usize,
    n_boot: usize,
    seed: u64,
) -> Result<f64> {
    bootstrap_se_multi(reference, &[kind], sample_size, n_boot, seed)?
        .pop()
        .expect("one kind requested")
}

/// [`bootstrap_se`] for several metrics sharing the same resamples.
pub fn bootstrap_se_multi(
    reference: &DataView<'_>,
    kinds: &[MetricKind],
    sample_size: usize,
    n_boot: usize,
    seed: u64,
) -> Result<Vec<Result<f64>>> {
    let labels = reference.require_labels()?;
    let n = reference.n_rows();
    if n == 0 {
        return Err(Error::EmptyInput("reference has no rows".into()));
    }
    if sample_size == 0 {
        return Err(Error::validation("bootstrap sample size must be at least 1"));
    }
    if n_boot < 2 {
        return Err(Error::validation("at least 2 bootstrap resamples are required"));
    }
    let per_resample: Vec<Vec<Option<f64>>> = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, BOOTSTRAP_STREAM, b as u64));
            let mut y = Vec::with_capacity(sample_size);
            let mut g = Vec::with_capacity(sample_size);
            let mut s = Vec::with_capacity(sample_size);
            for _ in 0..sample_size {
                let i = rng.random_range(0..n);
                y.push(labels[i]);
                g.push(reference.predictions()[i]);
                s.push(reference.scores()[i]);
            }
            kinds.iter().map(|&k| realized_metric(k, &y, &g, &s).ok()).collect()
        })
        .collect();

    Ok(kinds
        .iter()
        .enumerate()
        .map(|(k, kind)| {
            let values: Vec<f64> = per_resample.iter().filter_map(|r| r[k]).collect();
            let undefined = n_boot - values.len();
            if undefined as f64 > MAX_UNDEFINED_FRACTION * n_boot as f64 {
                return Err(Error::SeUndefined(format!(
                    "{kind} undefined on {undefined} of {n_boot} resamples"
                )));
            }
            let m = values.len() as f64;
            let mean = values.iter().sum::<f64>() / m;
            Ok((values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m).sqrt())
        })
        .collect())
}

/// One reference/production pair with labelled production data.
#[derive(Debug, Clone)]
pub struct EvaluationCase {
    pub id: String,
    pub reference: ScoredDataset,
    pub production: ScoredDataset,
    pub chunk_size: usize,
    pub step: usize,
    se: Vec<(MetricKind, std::result::Result<f64, String>)>,
}

impl EvaluationCase {
    pub fn new(
        id: impl Into<String>,
        reference: ScoredDataset,
        production: ScoredDataset,
        chunk_size: usize,
        step: usize,
    ) -> Result<Self> {
        reference.view().require_labels()?;
        production.view().require_labels()?;
        if chunk_size == 0 || step == 0 {
            return Err(Error::validation("chunk size and step must be at least 1"));
        }
        Ok(EvaluationCase {
            id: id.into(),
            reference,
            production,
            chunk_size,
            step,
            se: Vec::new(),
        })
    }

    /// Computes bootstrap SEs (sample size = chunk size) for `kinds`.
    pub fn with_bootstrap(mut self, kinds: &[MetricKind], n_boot: usize, seed: u64) -> Result<Self> {
        let se = bootstrap_se_multi(&self.reference.view(), kinds, self.chunk_size, n_boot, seed)?;
        for (&kind, r) in kinds.iter().zip(se) {
            self.set_se(kind, r.map_err(|e| e.to_string()));
        }
        Ok(self)
    }

    /// Uses a known standard error for `kind`.
    pub fn with_se(mut self, kind: MetricKind, se: f64) -> Self {
        self.set_se(kind, Ok(se));
        self
    }

    fn set_se(&mut self, kind: MetricKind, se: std::result::Result<f64, String>) {
        self.se.retain(|(k, _)| *k != kind);
        self.se.push((kind, se));
        self.se.sort_by_key(|(k, _)| *k);
    }

    pub fn se(&self, kind: MetricKind) -> Option<f64> {
        self.se.iter().find(|(k, _)| *k == kind).and_then(|(_, r)| r.as_ref().ok().copied())
    }

    pub fn se_table(&self) -> &[(MetricKind, std::result::Result<f64, String>)] {
        &self.se
    }

    /// Number of production chunks.
    pub fn n_chunks(&self) -> usize {
        let n = self.production.n_rows();
        if n < self.chunk_size {
            0
        } else {
            (n - self.chunk_size) / self.step + 1
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject(String),
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept)
    }
}

/// Screens a case: enough reference data for three chunks, reference
/// AUROC of at least 0.5, nonzero reference F1 and a positive, defined SE
/// for every metric whose SE has been computed.
pub fn filter_case(case: &EvaluationCase) -> Verdict {
    filter_reference(&case.reference.view(), case.chunk_size, &case.se)
}

/// The checks of [`filter_case`] on a labelled reference alone.
pub fn filter_reference(
    reference: &DataView<'_>,
    chunk_size: usize,
    se: &[(MetricKind, std::result::Result<f64, String>)],
) -> Verdict {
    let r = reference;
    let need = MIN_REFERENCE_CHUNKS * chunk_size;
    if r.n_rows() < need {
        return Verdict::Reject(format!(
            "fewer than {MIN_REFERENCE_CHUNKS} chunks of reference data ({} rows, need {need})",
            r.n_rows()
        ));
    }
    let Some(labels) = r.labels() else {
        return Verdict::Reject("reference has no labels".into());
    };
    match realized_metric(MetricKind::Auroc, labels, r.predictions(), r.scores()) {
        Ok(a) if a < 0.5 => return Verdict::Reject(format!("reference AUROC {a} below 0.5")),
        Err(e) => return Verdict::Reject(format!("reference AUROC undefined: {e}")),
        Ok(_) => {}
    }
    match realized_metric(MetricKind::F1, labels, r.predictions(), r.scores()) {
        Ok(0.0) => return Verdict::Reject("reference F1 is 0".into()),
        Err(e) => return Verdict::Reject(format!("reference F1 undefined: {e}")),
        Ok(_) => {}
    }
    for (kind, se) in se {
        match se {
            Err(e) => return Verdict::Reject(format!("{kind} standard error undefined: {e}")),
            Ok(v) if !(*v > 0.0) => return Verdict::Reject(format!("{kind} standard error is {v}")),
            Ok(_) => {}
        }
    }
    Verdict::Accept
}

/// Realized and estimated values of one metric on one chunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationPoint {
    pub case_id: String,
    pub chunk_index: usize,
    pub kind: MetricKind,
    pub realized: f64,
    /// Realized value on the reference data.
    pub reference: f64,
    pub se: f64,
    pub estimates: Vec<(Method, f64)>,
}

impl EstimationPoint {
    pub fn estimate(&self, method: Method) -> Option<f64> {
        self.estimates.iter().find(|(m, _)| *m == method).map(|(_, v)| *v)
    }

    /// Absolute change from the reference value in SE units.
    pub fn change(&self) -> f64 {
        (self.realized - self.reference).abs() / self.se
    }

    fn scaled_error(&self, method: Method) -> Option<f64> {
        self.estimate(method).map(|e| (self.realized - e).abs() / self.se)
    }
}

fn scaled_errors(
    points: &[EstimationPoint],
    method: Method,
    kind: MetricKind,
) -> impl Iterator<Item = (&EstimationPoint, f64)> {
    points
        .iter()
        .filter(move |p| p.kind == kind)
        .filter_map(move |p| p.scaled_error(method).map(|e| (p, e)))
}

fn mean_of(values: impl Iterator<Item = f64>, what: &str) -> Result<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        return Err(Error::UndefinedMetric(format!("no points for {what}")));
    }
    Ok(sum / n as f64)
}

/// Mean absolute SE-scaled error of `method` on `kind`.
pub fn maste(points: &[EstimationPoint], method: Method, kind: MetricKind) -> Result<f64> {
    mean_of(scaled_errors(points, method, kind).map(|(_, e)| e), &format!("{method}/{kind}"))
}

/// Root mean squared SE-scaled error of `method` on `kind`.
pub fn rmsste(points: &[EstimationPoint], method: Method, kind: MetricKind) -> Result<f64> {
    mean_of(scaled_errors(points, method, kind).map(|(_, e)| e * e), &format!("{method}/{kind}")).map(f64::sqrt)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    /// Bucket midpoint in SE units of performance change.
    pub center: f64,
    pub maste: f64,
    pub count: usize,
}

/// MASTE grouped by the size of the performance change. Bucket `k`
/// covers changes in `[k * width, (k + 1) * width)` SE; empty buckets are
/// omitted.
pub fn rolling_maste(points: &[EstimationPoint], method: Method, kind: MetricKind, width: f64) -> Result<Vec<Bucket>> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::validation("bucket width must be positive"));
    }
    let mut acc: std::collections::BTreeMap<u64, (f64, usize)> = Default::default();
    for (p, e) in scaled_errors(points, method, kind) {
        let k = (p.change() / width).floor() as u64;
        let slot = acc.entry(k).or_default();
        slot.0 += e;
        slot.1 += 1;
    }
    Ok(acc
        .into_iter()
        .map(|(k, (sum, count))| Bucket {
            center: (k as f64 + 0.5) * width,
            maste: sum / count as f64,
            count,
        })
        .collect())
}

/// Estimates for one production chunk, with realized values when the
/// chunk is labelled.
#[derive(Debug)]
pub struct ChunkRecord {
    pub chunk_index: usize,
    pub start_index: usize,
    pub size: usize,
    pub estimates: Vec<MethodEstimate>,
    pub realized: Option<Vec<(MetricKind, std::result::Result<f64, String>)>>,
}

/// Runs every method of `suite` on each chunk of `production`. Chunks are
/// processed in parallel on the current rayon pool; output order follows
/// the chunk order.
pub fn estimate_chunks(
    suite: &EstimatorSuite<'_>,
    production: &DataView<'_>,
    chunk_size: usize,
    step: usize,
) -> Result<Vec<ChunkRecord>> {
    let chunks = split_chunks(*production, chunk_size, step)?;
    Ok(chunks
        .par_iter()
        .map(|c| {
            let view = c.view();
            let realized = view.labels().map(|y| {
                suite
                    .kinds()
                    .iter()
                    .map(|&k| (k, realized_metric(k, y, view.predictions(), view.scores()).map_err(|e| e.to_string())))
                    .collect()
            });
            ChunkRecord {
                chunk_index: c.index,
                start_index: c.start_index,
                size: c.size,
                estimates: suite.estimate_chunk(&view, c.start_index),
                realized,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditStatus {
    Accepted,
    Rejected,
    Skipped,
}

impl AuditStatus {
    pub fn name(self) -> &'static str {
        match self {
            AuditStatus::Accepted => "accepted",
            AuditStatus::Rejected => "rejected",
            AuditStatus::Skipped => "skipped",
        }
    }
}

/// Why a case, chunk or estimate was kept out of (or let into) the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub case_id: String,
    pub chunk_index: Option<usize>,
    pub kind: Option<MetricKind>,
    pub method: Option<Method>,
    pub status: AuditStatus,
    pub reason: String,
}

impl AuditEntry {
    fn case(case_id: &str, status: AuditStatus, reason: impl Into<String>) -> Self {
        AuditEntry {
            case_id: case_id.to_string(),
            chunk_index: None,
            kind: None,
            method: None,
            status,
            reason: reason.into(),
        }
    }
}

/// Turns chunk records into evaluation points. Chunks whose realized
/// metric is undefined and failed estimates are left out and audited.
pub fn points_from_records(
    case: &EvaluationCase,
    suite: &EstimatorSuite<'_>,
    records: &[ChunkRecord],
) -> Result<(Vec<EstimationPoint>, Vec<AuditEntry>)> {
    let mut points = Vec::new();
    let mut audit = Vec::new();
    for rec in records {
        let realized = rec
            .realized
            .as_ref()
            .ok_or_else(|| Error::validation("evaluation requires labelled production chunks"))?;
        for (kind, value) in realized {
            let skip = |reason: String, method: Option<Method>| AuditEntry {
                case_id: case.id.clone(),
                chunk_index: Some(rec.chunk_index),
                kind: Some(*kind),
                method,
                status: AuditStatus::Skipped,
                reason,
            };
            let Some(se) = case.se(*kind) else {
                return Err(Error::SeUndefined(format!("no standard error for {kind} in case {}", case.id)));
            };
            let realized = match value {
                Ok(v) => *v,
                Err(e) => {
                    audit.push(skip(format!("realized value undefined: {e}"), None));
                    continue;
                }
            };
            let mut estimates = Vec::new();
            for est in rec.estimates.iter().filter(|e| e.kind == *kind) {
                match &est.result {
                    Ok(e) => estimates.push((est.method, e.value)),
                    Err(e) => audit.push(skip(e.to_string(), Some(est.method))),
                }
            }
            points.push(EstimationPoint {
                case_id: case.id.clone(),
                chunk_index: rec.chunk_index,
                kind: *kind,
                realized,
                reference: suite.reference_value(*kind)?,
                se,
                estimates,
            });
        }
    }
    Ok((points, audit))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub kind: MetricKind,
    pub maste: f64,
    pub rmsste: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub method: Method,
    pub kind: MetricKind,
    pub bucket: Bucket,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeRow {
    pub case_id: String,
    pub kind: MetricKind,
    pub se: Option<f64>,
    pub error: Option<String>,
    pub n_chunks: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub summary: Vec<SummaryRow>,
    pub buckets: Vec<BucketRow>,
    pub se: Vec<SeRow>,
    pub audit: Vec<AuditEntry>,
    pub points: Vec<EstimationPoint>,
}

impl EvaluationReport {
    pub fn maste(&self, method: Method, kind: MetricKind) -> Option<f64> {
        self.row(method, kind).map(|r| r.maste)
    }

    pub fn rmsste(&self, method: Method, kind: MetricKind) -> Option<f64> {
        self.row(method, kind).map(|r| r.rmsste)
    }

    fn row(&self, method: Method, kind: MetricKind) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.method == method && r.kind == kind)
    }
}

/// Summary and bucket tables for every (method, kind) with at least one
/// point, in the given method and kind order.
pub fn summarize(
    points: &[EstimationPoint],
    methods: &[Method],
    kinds: &[MetricKind],
    width: f64,
) -> Result<(Vec<SummaryRow>, Vec<BucketRow>)> {
    let mut summary = Vec::new();
    let mut buckets = Vec::new();
    for &method in methods {
        for &kind in kinds {
            let n_points = scaled_errors(points, method, kind).count();
            if n_points == 0 {
                continue;
            }
            summary.push(SummaryRow {
                method,
                kind,
                maste: maste(points, method, kind)?,
                rmsste: rmsste(points, method, kind)?,
                n_points,
            });
            buckets.extend(
                rolling_maste(points, method, kind, width)?
                    .into_iter()
                    .map(|bucket| BucketRow { method, kind, bucket }),
            );
        }
    }
    Ok((summary, buckets))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationConfig {
    pub estimator: EstimatorConfig,
    pub n_boot: usize,
    pub bucket_width: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            estimator: EstimatorConfig::default(),
            n_boot: DEFAULT_N_BOOT,
            bucket_width: DEFAULT_BUCKET_WIDTH,
        }
    }
}

/// Bootstrap seed used for the `index`-th case of an evaluation run.
pub fn case_bootstrap_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, BOOTSTRAP_STREAM, 1 << 32 | index as u64)
}

/// Evaluates `methods` on every case. Missing standard errors are
/// bootstrapped; rejected cases and skipped chunks are recorded in the
/// audit trail.
pub fn evaluate_cases(
    cases: Vec<EvaluationCase>,
    kinds: &[MetricKind],
    methods: &[Method],
    config: &EvaluationConfig,
) -> Result<EvaluationReport> {
    let mut report = EvaluationReport::default();
    for (i, mut case) in cases.into_iter().enumerate() {
        let missing: Vec<MetricKind> = kinds
            .iter()
            .copied()
            .filter(|k| !case.se.iter().any(|(s, _)| s == k))
            .collect();
        if !missing.is_empty() {
            case = case.with_bootstrap(&missing, config.n_boot, case_bootstrap_seed(config.estimator.seed, i))?;
        }
        for &kind in kinds {
            let entry = case.se.iter().find(|(k, _)| *k == kind);
            report.se.push(SeRow {
                case_id: case.id.clone(),
                kind,
                se: entry.and_then(|(_, r)| r.as_ref().ok().copied()),
                error: entry.and_then(|(_, r)| r.as_ref().err().cloned()),
                n_chunks: case.n_chunks(),
            });
        }
        if let Verdict::Reject(reason) = filter_case(&case) {
            report.audit.push(AuditEntry::case(&case.id, AuditStatus::Rejected, reason));
            continue;
        }
        let (points, audit) = run_case(&case, kinds, methods, &config.estimator)?;
        report.audit.push(AuditEntry::case(
            &case.id,
            AuditStatus::Accepted,
            format!("{} chunks", case.n_chunks()),
        ));
        report.audit.extend(audit);
        report.points.extend(points);
    }
    let (summary, buckets) = summarize(&report.points, methods, kinds, config.bucket_width)?;
    report.summary = summary;
    report.buckets = buckets;
    Ok(report)
}

/// Fits the suite on the case reference and produces its evaluation
/// points. The case must carry SEs for `kinds`.
pub fn run_case(
    case: &EvaluationCase,
    kinds: &[MetricKind],
    methods: &[Method],
    config: &EstimatorConfig,
) -> Result<(Vec<EstimationPoint>, Vec<AuditEntry>)> {
    let suite = EstimatorSuite::fit(
        case.reference.view(),
        kinds,
        methods,
        config.clone().with_chunk_size(case.chunk_size),
    )?;
    let records = estimate_chunks(&suite, &case.production.view(), case.chunk_size, case.step)?;
    points_from_records(case, &suite, &records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub size: usize,
    pub method: Method,
    pub kind: MetricKind,
    /// Mean absolute error over chunks; `None` when the size was skipped.
    pub mae: Option<f64>,
    pub n_chunks: usize,
    pub note: String,
}

/// Re-chunks the case production data at each size (chunk start every
/// `step` rows) and reports the plain mean absolute error of each method.
/// Sizes that yield fewer than two chunks are skipped with a note.
pub fn sample_size_sweep(
    case: &EvaluationCase,
    kinds: &[MetricKind],
    sizes: &[usize],
    step: usize,
    methods: &[Method],
    config: &EstimatorConfig,
) -> Result<Vec<SweepRow>> {
    if sizes.is_empty() || sizes.contains(&0) || step == 0 {
        return Err(Error::validation("sizes and step must be positive"));
    }
    let mut rows = Vec::new();
    let production = case.production.view();
    for &size in sizes {
        let skipped = |note: String| {
            methods
                .iter()
                .flat_map(|&m| kinds.iter().map(move |&k| (m, k)))
                .map(|(method, kind)| SweepRow {
                    size,
                    method,
                    kind,
                    mae: None,
                    n_chunks: 0,
                    note: note.clone(),
                })
                .collect::<Vec<_>>()
        };
        let n_chunks = if production.n_rows() < size {
            0
        } else {
            (production.n_rows() - size) / step + 1
        };
        if n_chunks < 2 {
            rows.extend(skipped(format!(
                "production has {} rows, too few for 2 chunks of {size}",
                production.n_rows()
            )));
            continue;
        }
        let suite = match EstimatorSuite::fit(case.reference.view(), kinds, methods, config.clone().with_chunk_size(size)) {
            Ok(s) => s,
            Err(e) => {
                rows.extend(skipped(e.to_string()));
                continue;
            }
        };
        let records = estimate_chunks(&suite, &production, size, step)?;
        for &method in methods {
            for &kind in kinds {
                let mut errors = Vec::new();
                for rec in &records {
                    let realized = rec
                        .realized
                        .as_ref()
                        .and_then(|r| r.iter().find(|(k, _)| *k == kind))
                        .and_then(|(_, v)| v.as_ref().ok().copied());
                    let estimate = rec
                        .estimates
                        .iter()
                        .find(|e| e.method == method && e.kind == kind)
                        .and_then(|e| e.result.as_ref().ok().map(|v| v.value));
                    if let (Some(r), Some(e)) = (realized, estimate) {
                        errors.push((r - e).abs());
                    }
                }
                let n = errors.len();
                rows.push(SweepRow {
                    size,
                    method,
                    kind,
                    mae: (n > 0).then(|| errors.iter().sum::<f64>() / n as f64),
                    n_chunks: n,
                    note: if n < records.len() {
                        format!("{} chunks without a defined value", records.len() - n)
                    } else {
                        String::new()
                    },
                });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Role;

    fn point(case: &str, j: usize, realized: f64, reference: f64, se: f64, est: f64) -> EstimationPoint {
        EstimationPoint {
            case_id: case.into(),
            chunk_index: j,
            kind: MetricKind::Accuracy,
            realized,
            reference,
            se,
            estimates: vec![(Method::Pape, est)],
        }
    }

    fn dataset(n: usize, correct_every: usize, role: Role) -> ScoredDataset {
        let mut scores = Vec::new();
        let mut preds = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let y = (i % 2) as u8;
            let wrong = correct_every > 0 && i % correct_every == 0;
            let s = if y == 1 { 0.6 + 0.3 * (i % 7) as f64 / 7.0 } else { 0.1 + 0.3 * (i % 5) as f64 / 5.0 };
            let g = if wrong { 1 - y } else { y };
            scores.push(if wrong { 1.0 - s } else { s });
            preds.push(g);
            labels.push(y);
        }
        ScoredDataset::new(vec![0.0; n], 1, scores, preds, Some(labels), role).unwrap()
    }

    #[test]
    fn worked_maste_example() {
        let pts = vec![point("a", 0, 0.80, 0.8, 0.02, 0.81), point("a", 1, 0.80, 0.8, 0.02, 0.77)];
        assert!((maste(&pts, Method::Pape, MetricKind::Accuracy).unwrap() - 1.0).abs() < 1e-12);
        let r = rmsste(&pts, Method::Pape, MetricKind::Accuracy).unwrap();
        assert!((r - 1.25f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn perfect_estimates_score_zero() {
        let pts = vec![point("a", 0, 0.7, 0.8, 0.02, 0.7), point("b", 0, 0.9, 0.8, 0.01, 0.9)];
        assert_eq!(maste(&pts, Method::Pape, MetricKind::Accuracy).unwrap(), 0.0);
        assert_eq!(rmsste(&pts, Method::Pape, MetricKind::Accuracy).unwrap(), 0.0);
    }

    #[test]
    fn empty_points_undefined() {
        assert!(matches!(maste(&[], Method::Pape, MetricKind::Accuracy), Err(Error::UndefinedMetric(_))));
        let pts = vec![point("a", 0, 0.7, 0.8, 0.02, 0.7)];
        assert!(rmsste(&pts, Method::Iw, MetricKind::Accuracy).is_err());
    }

    #[test]
    fn buckets_follow_change_size() {
        let pts = vec![point("a", 0, 0.81, 0.8, 0.02, 0.81), point("a", 1, 0.86, 0.8, 0.02, 0.86)];
        let b = rolling_maste(&pts, Method::Pape, MetricKind::Accuracy, 2.0).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!((b[0].center, b[0].count), (1.0, 1));
        assert_eq!((b[1].center, b[1].count), (3.0, 1));

        let small = vec![point("a", 0, 0.81, 0.8, 0.02, 0.8), point("a", 1, 0.79, 0.8, 0.02, 0.8)];
        let b = rolling_maste(&small, Method::Pape, MetricKind::Accuracy, 2.0).unwrap();
        assert_eq!((b.len(), b[0].center, b[0].count), (1, 1.0, 2));
        assert!((b[0].maste - 0.5).abs() < 1e-12);
        assert!(rolling_maste(&small, Method::Pape, MetricKind::Accuracy, 0.0).is_err());
    }

    #[test]
    fn constant_statistic_has_zero_se() {
        let d = dataset(500, 0, Role::Reference);
        let se = bootstrap_se(&d.view(), MetricKind::Accuracy, 100, 50, 1).unwrap();
        assert_eq!(se, 0.0);
    }

    #[test]
    fn binomial_se() {
        let d = dataset(10_000, 10, Role::Reference);
        let se = bootstrap_se(&d.view(), MetricKind::Accuracy, 2000, 500, 3).unwrap();
        let expect = (0.9f64 * 0.1 / 2000.0).sqrt();
        assert!((se / expect - 1.0).abs() < 0.2, "{se} vs {expect}");
    }

    #[test]
    fn single_class_auroc_se_undefined() {
        let n = 100;
        let d = ScoredDataset::new(vec![0.0; n], 1, vec![0.3; n], vec![0; n], Some(vec![0; n]), Role::Reference).unwrap();
        assert!(matches!(
            bootstrap_se(&d.view(), MetricKind::Auroc, 50, 20, 0),
            Err(Error::SeUndefined(_))
        ));
    }

    #[test]
    fn filtering_gates() {
        let prod = dataset(100, 10, Role::Production);
        let case = |n| EvaluationCase::new("c", dataset(n, 10, Role::Reference), prod.clone(), 2000, 2000).unwrap();
        assert!(matches!(filter_case(&case(5999)), Verdict::Reject(r) if r.contains("fewer than 3 chunks")));
        assert_eq!(filter_case(&case(6000)), Verdict::Accept);
        assert!(!filter_case(&case(6000).with_se(MetricKind::Accuracy, 0.0)).is_accept());

        let n = 6000;
        let flipped: Vec<f64> = dataset(n, 10, Role::Reference).scores().iter().map(|s| 1.0 - s).collect();
        let base = dataset(n, 10, Role::Reference);
        let bad = ScoredDataset::new(
            vec![0.0; n],
            1,
            flipped,
            base.predictions().to_vec(),
            base.labels().map(<[u8]>::to_vec),
            Role::Reference,
        )
        .unwrap();
        let c = EvaluationCase::new("c", bad, prod, 2000, 2000).unwrap();
        assert!(matches!(filter_case(&c), Verdict::Reject(r) if r.contains("AUROC")));
    }

    #[test]
    fn case_counts_chunks() {
        let c = EvaluationCase::new("c", dataset(10, 0, Role::Reference), dataset(5000, 0, Role::Production), 2000, 1000)
            .unwrap();
        assert_eq!(c.n_chunks(), 4);
    }
}
