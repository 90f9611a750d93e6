//! Performance estimation methods.
//!
//! [`pape_estimate`] runs the full density-ratio-weighted calibration
//! pipeline for one production chunk; [`cbpe_estimate`] is the same without
//! reweighting. The remaining methods are the reference baselines. An
//! [`EstimatorSuite`] fits everything that depends on reference data only
//! once and then estimates chunk by chunk, sharing per-chunk work (density
//! ratios, calibrated probabilities, reverse models) across metrics.

pub mod baselines;
pub mod reconstruct;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calibration::{fit_unweighted_calibrator, fit_weighted_calibrator, Calibrator};
use crate::data::DataView;
use crate::density_ratio::{fit_dre, DensityRatioModel, DreConfig, Weights};
use crate::error::{Error, Result};
use crate::learners::ClassifierConfig;
use crate::metrics::{realized_metric, MetricKind};
use crate::seed::derive_seed;

pub use baselines::{
    atc_fit, doc_fit, iw_estimate, iw_from_model, reverse_raw, rtmod_fit, AtcFit, DocConfig, DocFit, DocModel,
    RtModFit,
};
pub use reconstruct::{estimate_auroc, estimate_confusion, estimate_from_calibrated, expected_accuracy};

/// Chunks smaller than this are flagged on every PAPE/CBPE estimate.
pub const MIN_CHUNK_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    TestSet,
    RtMod,
    Atc,
    Doc,
    Cbpe,
    Iw,
    Pape,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::TestSet,
        Method::RtMod,
        Method::Atc,
        Method::Doc,
        Method::Cbpe,
        Method::Iw,
        Method::Pape,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::TestSet => "test_set",
            Method::RtMod => "rt_mod",
            Method::Atc => "atc",
            Method::Doc => "doc",
            Method::Cbpe => "cbpe",
            Method::Iw => "iw",
            Method::Pape => "pape",
        }
    }

    fn stream(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == norm || (norm == "testset" && *m == Method::TestSet) || (norm == "rtmod" && *m == Method::RtMod))
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// Conditions worth surfacing alongside an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Warning {
    SmallChunk(usize),
    /// Fraction of production rows in poorly covered regions.
    Coverage(f64),
    /// Fraction of weights capped at the clip value.
    ClippedWeights(f64),
    LowEffectiveSampleSize(f64),
    FallbackToTestSet(String),
    /// A precision/recall/F1 denominator was zero.
    DegenerateMetric,
    DreNotConverged,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::SmallChunk(n) => write!(f, "small_chunk(n={n})"),
            Warning::Coverage(x) => write!(f, "low_coverage(fraction={x})"),
            Warning::ClippedWeights(x) => write!(f, "clipped_weights(fraction={x})"),
            Warning::LowEffectiveSampleSize(x) => write!(f, "low_ess(ess={x})"),
            Warning::FallbackToTestSet(why) => write!(f, "fallback_test_set({why})"),
            Warning::DegenerateMetric => f.write_str("degenerate_metric"),
            Warning::DreNotConverged => f.write_str("dre_not_converged"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub warnings: Vec<Warning>,
}

impl Estimate {
    pub fn new(value: f64) -> Self {
        Estimate {
            value,
            warnings: Vec::new(),
        }
    }

    pub fn with_warning(value: f64, warning: Warning) -> Self {
        Estimate {
            value,
            warnings: vec![warning],
        }
    }

    /// Warnings joined with `;` for tabular output.
    pub fn warning_string(&self) -> String {
        self.warnings.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
    }
}

/// Per-chunk state of the weighted calibration pipeline.
#[derive(Debug, Clone)]
pub struct PapeChunkFit {
    pub dre: DensityRatioModel,
    pub reference_weights: Weights,
    pub calibrator: Calibrator,
    /// Calibrated probabilities of the chunk rows.
    pub calibrated: Vec<f64>,
}

impl PapeChunkFit {
    fn warnings(&self, chunk_rows: usize) -> Vec<Warning> {
        let mut w = Vec::new();
        if chunk_rows < MIN_CHUNK_ROWS {
            w.push(Warning::SmallChunk(chunk_rows));
        }
        if self.dre.coverage_warning() {
            w.push(Warning::Coverage(self.dre.prod_uncovered_fraction()));
        }
        if self.reference_weights.clipped_fraction > 0.0 {
            w.push(Warning::ClippedWeights(self.reference_weights.clipped_fraction));
        }
        if !self.dre.classifier().converged() {
            w.push(Warning::DreNotConverged);
        }
        w
    }
}

fn check_columns(reference: &DataView<'_>, chunk: &DataView<'_>) -> Result<()> {
    if reference.n_features() != chunk.n_features() {
        return Err(Error::DimensionMismatch {
            expected: reference.n_features(),
            found: chunk.n_features(),
        });
    }
    Ok(())
}

/// Density ratios on reference, weighted calibrator, calibrated chunk
/// probabilities.
pub fn fit_pape_chunk(
    reference: &DataView<'_>,
    chunk: &DataView<'_>,
    config: &DreConfig,
    seed: u64,
) -> Result<PapeChunkFit> {
    check_columns(reference, chunk)?;
    let labels = reference.require_labels()?;
    let dre = fit_dre(reference.features(), chunk.features(), chunk.n_features(), config, seed)?;
    pape_from_model(reference, labels, chunk, dre)
}

fn pape_from_model(
    reference: &DataView<'_>,
    labels: &[u8],
    chunk: &DataView<'_>,
    dre: DensityRatioModel,
) -> Result<PapeChunkFit> {
    let reference_weights = dre.estimate_weights(reference.features())?;
    let calibrator = fit_weighted_calibrator(reference.scores(), labels, &reference_weights.values)?;
    let calibrated = calibrator.calibrate(chunk.scores())?;
    Ok(PapeChunkFit {
        dre,
        reference_weights,
        calibrator,
        calibrated,
    })
}

/// PAPE estimate of `kind` on one production chunk.
pub fn pape_estimate(
    kind: MetricKind,
    reference: &DataView<'_>,
    chunk: &DataView<'_>,
    config: &DreConfig,
    seed: u64,
) -> Result<Estimate> {
    let fit = fit_pape_chunk(reference, chunk, config, seed)?;
    let mut e = estimate_from_calibrated(kind, &fit.calibrated, chunk.predictions(), chunk.scores())?;
    e.warnings.extend(fit.warnings(chunk.n_rows()));
    Ok(e)
}

/// CBPE estimate: calibration on reference data without reweighting.
pub fn cbpe_estimate(kind: MetricKind, reference: &DataView<'_>, chunk: &DataView<'_>) -> Result<Estimate> {
    let labels = reference.require_labels()?;
    let calibrator = fit_unweighted_calibrator(reference.scores(), labels)?;
    cbpe_with(kind, &calibrator, chunk)
}

fn cbpe_with(kind: MetricKind, calibrator: &Calibrator, chunk: &DataView<'_>) -> Result<Estimate> {
    let calibrated = calibrator.calibrate(chunk.scores())?;
    let mut e = estimate_from_calibrated(kind, &calibrated, chunk.predictions(), chunk.scores())?;
    if chunk.n_rows() < MIN_CHUNK_ROWS {
        e.warnings.push(Warning::SmallChunk(chunk.n_rows()));
    }
    Ok(e)
}

/// Tunables shared by every method of a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub dre: DreConfig,
    /// Reverse-model learner for RT-mod.
    pub reverse: ClassifierConfig,
    pub doc: DocConfig,
    /// Size of the RT-mod reference pieces; normally the chunk size.
    pub chunk_size: usize,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            dre: DreConfig::default(),
            reverse: ClassifierConfig::default(),
            doc: DocConfig::default(),
            chunk_size: 2000,
            seed: 0,
        }
    }
}

impl EstimatorConfig {
    /// Ties the chunk-size dependent settings (RT-mod pieces, DoC
    /// resamples) to `chunk_size`.
    pub fn with_chunk_size(mut self, chunk_size: usize) -> Self {
        self.chunk_size = chunk_size;
        self.doc.resample_size = chunk_size;
        self
    }
}

/// One (method, metric) result for a chunk.
#[derive(Debug)]
pub struct MethodEstimate {
    pub method: Method,
    pub kind: MetricKind,
    pub result: Result<Estimate>,
}

/// All estimation methods fitted against one reference dataset.
#[derive(Debug, Clone)]
pub struct EstimatorSuite<'r> {
    reference: DataView<'r>,
    config: EstimatorConfig,
    kinds: Vec<MetricKind>,
    methods: Vec<Method>,
    reference_values: Vec<f64>,
    cbpe: Option<Calibrator>,
    atc: Vec<AtcFit>,
    doc: Vec<DocFit>,
    rtmod: Option<RtModFit>,
}

impl<'r> EstimatorSuite<'r> {
    /// Fits the reference-only parts of every requested method.
    pub fn fit(
        reference: DataView<'r>,
        kinds: &[MetricKind],
        methods: &[Method],
        config: EstimatorConfig,
    ) -> Result<Self> {
        let labels = reference.require_labels()?;
        if kinds.is_empty() || methods.is_empty() {
            return Err(Error::Config("at least one metric and one method are required".into()));
        }
        let reference_values = kinds
            .iter()
            .map(|&k| realized_metric(k, labels, reference.predictions(), reference.scores()))
            .collect::<Result<Vec<_>>>()?;
        let wants = |m: Method| methods.contains(&m);
        let cbpe = if wants(Method::Cbpe) {
            Some(fit_unweighted_calibrator(reference.scores(), labels)?)
        } else {
            None
        };
        let atc = if wants(Method::Atc) {
            kinds.iter().map(|&k| atc_fit(k, &reference)).collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        let doc = if wants(Method::Doc) {
            kinds
                .iter()
                .map(|&k| doc_fit(k, &reference, &config.doc, derive_seed(config.seed, Method::Doc.stream(), k as u64)))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        let rtmod = if wants(Method::RtMod) {
            Some(rtmod_fit(kinds, &reference, config.chunk_size, &config.reverse)?)
        } else {
            None
        };
        Ok(EstimatorSuite {
            reference,
            config,
            kinds: kinds.to_vec(),
            methods: methods.to_vec(),
            reference_values,
            cbpe,
            atc,
            doc,
            rtmod,
        })
    }

    pub fn reference(&self) -> DataView<'r> {
        self.reference
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn kinds(&self) -> &[MetricKind] {
        &self.kinds
    }

    pub fn methods(&self) -> &[Method] {
        &self.methods
    }

    fn kind_index(&self, kind: MetricKind) -> Result<usize> {
        self.kinds
            .iter()
            .position(|&k| k == kind)
            .ok_or_else(|| Error::Config(format!("suite was not fitted for {kind}")))
    }

    /// Realized reference value of `kind`.
    pub fn reference_value(&self, kind: MetricKind) -> Result<f64> {
        Ok(self.reference_values[self.kind_index(kind)?])
    }

    /// TEST SET estimate: the reference value, for every chunk.
    pub fn testset_estimate(&self, kind: MetricKind) -> Result<Estimate> {
        self.reference_value(kind).map(Estimate::new)
    }

    pub fn atc(&self, kind: MetricKind) -> Option<&AtcFit> {
        self.atc.iter().find(|f| f.kind == kind)
    }

    pub fn doc(&self, kind: MetricKind) -> Option<&DocFit> {
        self.doc.iter().find(|f| f.kind == kind)
    }

    pub fn rtmod(&self) -> Option<&RtModFit> {
        self.rtmod.as_ref()
    }

    pub fn cbpe_calibrator(&self) -> Option<&Calibrator> {
        self.cbpe.as_ref()
    }

    /// Estimates every requested (method, metric) pair on one chunk.
    ///
    /// `start_index` identifies the chunk for seeding, so results depend
    /// only on the chunk contents, its position and the suite seed.
    pub fn estimate_chunk(&self, chunk: &DataView<'_>, start_index: usize) -> Vec<MethodEstimate> {
        let mut out = Vec::with_capacity(self.methods.len() * self.kinds.len());
        let needs_dre = self.methods.iter().any(|m| matches!(m, Method::Pape | Method::Iw));
        let dre: Option<std::result::Result<DensityRatioModel, String>> = needs_dre.then(|| {
            check_columns(&self.reference, chunk)
                .and_then(|_| {
                    fit_dre(
                        self.reference.features(),
                        chunk.features(),
                        chunk.n_features(),
                        &self.config.dre,
                        derive_seed(self.config.seed, Method::Pape.stream(), start_index as u64),
                    )
                })
                .map_err(|e| e.to_string())
        });
        let pape: Option<std::result::Result<PapeChunkFit, String>> =
            match (&dre, self.methods.contains(&Method::Pape)) {
                (Some(Ok(model)), true) => Some(
                    pape_from_model(
                        &self.reference,
                        self.reference.labels().unwrap_or_default(),
                        chunk,
                        model.clone(),
                    )
                    .map_err(|e| e.to_string()),
                ),
                (Some(Err(e)), true) => Some(Err(e.clone())),
                _ => None,
            };
        let reverse: Option<Vec<std::result::Result<f64, String>>> = self.rtmod.as_ref().map(|_| {
            match reverse_raw(&self.kinds, chunk, &self.reference, &self.config.reverse) {
                Ok(v) => v.into_iter().map(|r| r.map_err(|e| e.to_string())).collect(),
                Err(e) => vec![Err(e.to_string()); self.kinds.len()],
            }
        });

        for &method in &self.methods {
            for (k, &kind) in self.kinds.iter().enumerate() {
                let result = match method {
                    Method::TestSet => self.testset_estimate(kind),
                    Method::Atc => self.atc[k].estimate(chunk.scores()),
                    Method::Doc => self.doc[k].estimate(chunk.scores()),
                    Method::RtMod => {
                        let raw = reverse.as_ref().expect("reverse fitted with rt-mod")[k].clone();
                        self.rtmod.as_ref().expect("rt-mod fitted").correct(kind, raw)
                    }
                    Method::Cbpe => cbpe_with(kind, self.cbpe.as_ref().expect("cbpe fitted"), chunk),
                    Method::Iw => match dre.as_ref().expect("dre fitted for iw") {
                        Ok(model) => iw_from_model(kind, &self.reference, model),
                        Err(e) => Err(Error::Upstream(e.clone())),
                    },
                    Method::Pape => match pape.as_ref().expect("pape fitted") {
                        Ok(fit) => estimate_from_calibrated(kind, &fit.calibrated, chunk.predictions(), chunk.scores())
                            .map(|mut e| {
                                e.warnings.extend(fit.warnings(chunk.n_rows()));
                                e
                            }),
                        Err(e) => Err(Error::Upstream(e.clone())),
                    },
                };
                out.push(MethodEstimate { method, kind, result });
            }
        }
        out
    }
}
