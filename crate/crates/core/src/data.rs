//! Scored datasets, CSV ingestion and time-ordered chunking.
//!
//! A [`ScoredDataset`] holds what a monitoring system sees for one period:
//! model inputs, the raw scores of the monitored classifier, its binary
//! predictions and (for reference data) the true labels. Production data is
//! evaluated in fixed-size [`Chunk`]s cut in row order.

use std::collections::HashSet;
use std::fs::File;
use std::io::Write;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Reference,
    Production,
}

/// Column layout of a scored CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub feature_columns: Vec<String>,
    pub score_column: String,
    pub prediction_column: String,
    #[serde(default)]
    pub label_column: Option<String>,
}

impl DatasetSchema {
    pub const DEFAULT_SCORE: &'static str = "score";
    pub const DEFAULT_PREDICTION: &'static str = "prediction";
    pub const DEFAULT_LABEL: &'static str = "label";

    /// Schema using the default column names, with every other header
    /// column treated as a feature.
    pub fn infer(headers: &[String]) -> Self {
        let reserved = [
            Self::DEFAULT_SCORE,
            Self::DEFAULT_PREDICTION,
            Self::DEFAULT_LABEL,
        ];
        DatasetSchema {
            feature_columns: headers
                .iter()
                .filter(|h| !reserved.contains(&h.as_str()))
                .cloned()
                .collect(),
            score_column: Self::DEFAULT_SCORE.to_string(),
            prediction_column: Self::DEFAULT_PREDICTION.to_string(),
            label_column: Some(Self::DEFAULT_LABEL.to_string()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        let special = [Some(&self.score_column), Some(&self.prediction_column), self.label_column.as_ref()];
        for name in special.into_iter().flatten() {
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema {
                    column: name.clone(),
                    problem: "is listed more than once".into(),
                });
            }
        }
        for name in &self.feature_columns {
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema {
                    column: name.clone(),
                    problem: "is listed more than once or overlaps a score/prediction/label column"
                        .into(),
                });
            }
        }
        Ok(())
    }
}

/// Borrowed view over a contiguous (or whole) set of rows.
#[derive(Debug, Clone, Copy)]
pub struct DataView<'a> {
    features: &'a [f64],
    n_features: usize,
    scores: &'a [f64],
    predictions: &'a [u8],
    labels: Option<&'a [u8]>,
}

impl<'a> DataView<'a> {
    pub fn n_rows(&self) -> usize {
        self.scores.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Row-major feature values.
    pub fn features(&self) -> &'a [f64] {
        self.features
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn scores(&self) -> &'a [f64] {
        self.scores
    }

    pub fn predictions(&self) -> &'a [u8] {
        self.predictions
    }

    pub fn labels(&self) -> Option<&'a [u8]> {
        self.labels
    }

    pub fn require_labels(&self) -> Result<&'a [u8]> {
        self.labels
            .ok_or_else(|| Error::validation("labels are required for this operation"))
    }

    pub fn slice(&self, rows: Range<usize>) -> DataView<'a> {
        DataView {
            features: &self.features[rows.start * self.n_features..rows.end * self.n_features],
            n_features: self.n_features,
            scores: &self.scores[rows.clone()],
            predictions: &self.predictions[rows.clone()],
            labels: self.labels.map(|l| &l[rows]),
        }
    }

    /// Copies the given rows (with repetition allowed) into an owned dataset.
    pub fn select(&self, indices: &[usize], role: Role) -> ScoredDataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        ScoredDataset {
            features,
            n_features: self.n_features,
            scores: indices.iter().map(|&i| self.scores[i]).collect(),
            predictions: indices.iter().map(|&i| self.predictions[i]).collect(),
            labels: self.labels.map(|l| indices.iter().map(|&i| l[i]).collect()),
            role,
        }
    }

    pub fn to_owned(&self, role: Role) -> ScoredDataset {
        ScoredDataset {
            features: self.features.to_vec(),
            n_features: self.n_features,
            scores: self.scores.to_vec(),
            predictions: self.predictions.to_vec(),
            labels: self.labels.map(<[u8]>::to_vec),
            role,
        }
    }
}

/// Inputs, scores, predictions and optional labels of one data period.
///
/// Immutable once constructed; every constructor validates the invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDataset {
    features: Vec<f64>,
    n_features: usize,
    scores: Vec<f64>,
    predictions: Vec<u8>,
    labels: Option<Vec<u8>>,
    role: Role,
}

impl ScoredDataset {
    /// Builds a dataset from row-major features.
    pub fn new(
        features: Vec<f64>,
        n_features: usize,
        scores: Vec<f64>,
        predictions: Vec<u8>,
        labels: Option<Vec<u8>>,
        role: Role,
    ) -> Result<Self> {
        let n = scores.len();
        if n == 0 {
            return Err(Error::EmptyInput("dataset has no rows".into()));
        }
        if features.len() != n * n_features {
            return Err(Error::validation(format!(
                "feature matrix has {} values, expected {n} rows x {n_features} columns",
                features.len()
            )));
        }
        if predictions.len() != n {
            return Err(Error::validation(format!(
                "{} predictions for {n} scores",
                predictions.len()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::validation(format!("{} labels for {n} scores", l.len())));
            }
        }
        if role == Role::Reference && labels.is_none() {
            return Err(Error::validation("reference data requires labels"));
        }
        for i in 0..n {
            if n_features > 0 {
                if let Some(v) = features[i * n_features..(i + 1) * n_features]
                    .iter()
                    .find(|v| !v.is_finite())
                {
                    return Err(Error::at_row(i, format!("non-finite feature value {v}")));
                }
            }
            check_score(i, scores[i])?;
            check_binary(i, "prediction", predictions[i])?;
            if let Some(l) = &labels {
                check_binary(i, "label", l[i])?;
            }
        }
        Ok(ScoredDataset {
            features,
            n_features,
            scores,
            predictions,
            labels,
            role,
        })
    }

    /// Builds a dataset from one feature vector per row.
    pub fn from_rows(
        rows: &[Vec<f64>],
        scores: Vec<f64>,
        predictions: Vec<u8>,
        labels: Option<Vec<u8>>,
        role: Role,
    ) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_features) {
            return Err(Error::validation("rows have differing feature counts"));
        }
        let features = rows.iter().flatten().copied().collect();
        Self::new(features, n_features, scores, predictions, labels, role)
    }

    pub fn view(&self) -> DataView<'_> {
        DataView {
            features: &self.features,
            n_features: self.n_features,
            scores: &self.scores,
            predictions: &self.predictions,
            labels: self.labels.as_deref(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.scores.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn predictions(&self) -> &[u8] {
        &self.predictions
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    /// Same rows with labels removed, as a deployed system would see them.
    pub fn without_labels(&self) -> ScoredDataset {
        ScoredDataset {
            labels: None,
            role: Role::Production,
            ..self.clone()
        }
    }
}

fn check_score(row: usize, s: f64) -> Result<()> {
    if !s.is_finite() || !(0.0..=1.0).contains(&s) {
        return Err(Error::at_row(row, format!("score {s} is outside [0, 1]")));
    }
    Ok(())
}

fn check_binary(row: usize, what: &str, v: u8) -> Result<()> {
    if v > 1 {
        return Err(Error::at_row(row, format!("{what} {v} is not 0 or 1")));
    }
    Ok(())
}

/// A contiguous window of production rows.
#[derive(Debug, Clone, Copy)]
pub struct Chunk<'a> {
    pub index: usize,
    pub start_index: usize,
    pub size: usize,
    view: DataView<'a>,
}

impl<'a> Chunk<'a> {
    pub fn view(&self) -> DataView<'a> {
        self.view
    }

    pub fn rows(&self) -> Range<usize> {
        self.start_index..self.start_index + self.size
    }
}

/// Cuts `data` into windows `[k*step, k*step + chunk_size)`, keeping only
/// windows that are completely filled.
pub fn split_chunks(data: DataView<'_>, chunk_size: usize, step: usize) -> Result<Vec<Chunk<'_>>> {
    if chunk_size == 0 || step == 0 {
        return Err(Error::validation("chunk_size and step must be at least 1"));
    }
    let n = data.n_rows();
    let mut chunks = Vec::new();
    let mut start = 0;
    while start + chunk_size <= n {
        chunks.push(Chunk {
            index: chunks.len(),
            start_index: start,
            size: chunk_size,
            view: data.slice(start..start + chunk_size),
        });
        start += step;
    }
    Ok(chunks)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::io(path, source),
            _ => unreachable!(),
        }
    } else {
        Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

/// Schema inferred from the header row of `path`.
pub fn infer_schema(path: &Path) -> Result<DatasetSchema> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.iter().all(String::is_empty) {
        return Err(Error::EmptyInput(format!("{} has no header row", path.display())));
    }
    Ok(DatasetSchema::infer(&headers))
}

/// Reads a headered CSV file into a validated [`ScoredDataset`].
///
/// Row indices in validation errors are zero-based and exclude the header.
/// A missing label column is accepted for production data only.
pub fn load_dataset(path: &Path, schema: &DatasetSchema, role: Role) -> Result<ScoredDataset> {
    schema.validate()?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyInput(format!("{} has no header row", path.display())));
    }
    let find = |name: &str| headers.iter().position(|h| h == name);
    let require = |name: &str| {
        find(name).ok_or_else(|| Error::Schema {
            column: name.to_string(),
            problem: format!("not found in {}", path.display()),
        })
    };
    let feature_idx: Vec<usize> = schema
        .feature_columns
        .iter()
        .map(|c| require(c))
        .collect::<Result<_>>()?;
    let score_idx = require(&schema.score_column)?;
    let pred_idx = require(&schema.prediction_column)?;
    let label_idx = match (&schema.label_column, role) {
        (Some(c), Role::Reference) => Some(require(c)?),
        (Some(c), Role::Production) => find(c),
        (None, Role::Reference) => {
            return Err(Error::Schema {
                column: "<label>".into(),
                problem: "must be configured for reference data".into(),
            })
        }
        (None, Role::Production) => None,
    };

    let n_features = feature_idx.len();
    let mut features = Vec::new();
    let mut scores = Vec::new();
    let mut predictions = Vec::new();
    let mut labels = label_idx.map(|_| Vec::new());
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let field = |idx: usize| -> Result<&str> {
            record.get(idx).map(str::trim).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                message: format!("row {row} is missing column {}", headers[idx]),
            })
        };
        let real = |idx: usize| -> Result<f64> {
            let raw = field(idx)?;
            raw.parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                message: format!("row {row}, column {}: `{raw}` is not a number", headers[idx]),
            })
        };
        let binary = |idx: usize| -> Result<u8> {
            let v = real(idx)?;
            if v == 0.0 {
                Ok(0)
            } else if v == 1.0 {
                Ok(1)
            } else {
                Err(Error::at_row(row, format!("{} value {v} is not 0 or 1", headers[idx])))
            }
        };
        for &i in &feature_idx {
            features.push(real(i)?);
        }
        scores.push(real(score_idx)?);
        predictions.push(binary(pred_idx)?);
        if let (Some(i), Some(l)) = (label_idx, labels.as_mut()) {
            l.push(binary(i)?);
        }
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput(format!("{} has no data rows", path.display())));
    }
    ScoredDataset::new(features, n_features, scores, predictions, labels, role)
}

/// Writes a dataset in the format read by [`load_dataset`]. Values are
/// written in shortest round-trip form, so reloading is bit-exact.
pub fn write_dataset(path: &Path, data: &ScoredDataset, schema: &DatasetSchema) -> Result<()> {
    schema.validate()?;
    if schema.feature_columns.len() != data.n_features() {
        return Err(Error::DimensionMismatch {
            expected: data.n_features(),
            found: schema.feature_columns.len(),
        });
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let write_labels = data.labels().is_some() && schema.label_column.is_some();
    let mut header: Vec<&str> = schema.feature_columns.iter().map(String::as_str).collect();
    header.push(&schema.score_column);
    header.push(&schema.prediction_column);
    if write_labels {
        header.push(schema.label_column.as_deref().unwrap_or_default());
    }
    let io = |e| Error::io(path, e);
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    let view = data.view();
    let mut line = String::new();
    for i in 0..data.n_rows() {
        line.clear();
        for v in view.row(i) {
            line.push_str(&format!("{v},"));
        }
        line.push_str(&format!("{},{}", view.scores()[i], view.predictions()[i]));
        if write_labels {
            line.push_str(&format!(",{}", data.labels().unwrap_or_default()[i]));
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}
