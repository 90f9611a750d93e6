//! Command-line front end: `validate`, `estimate`, `evaluate`, `sweep` and
//! `synth`. Every command writes CSV tables plus a `manifest.json` echoing
//! the effective configuration, and produces identical bytes for identical
//! inputs regardless of the worker count.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{infer_schema, load_dataset, DatasetSchema, Role, ScoredDataset};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorConfig, EstimatorSuite, Method};
use crate::evaluation::{
    case_bootstrap_seed, estimate_chunks, evaluate_cases, filter_reference, sample_size_sweep, summarize,
    AuditEntry, AuditStatus, EstimationPoint, EvaluationCase, EvaluationConfig, EvaluationReport, Verdict,
    DEFAULT_BUCKET_WIDTH, DEFAULT_N_BOOT, DEFAULT_SWEEP_SIZES, DEFAULT_SWEEP_STEP,
};
use crate::metrics::{realized_metric, MetricKind};
use crate::synthetic::{generate, write_pair, ShiftSpec};

#[derive(Debug, Parser)]
#[command(name = "pape", version, about = "Estimate classifier performance on unlabeled production data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check input files and the case filtering rules.
    Validate(CommonArgs),
    /// Estimate every metric with every method on each production chunk.
    Estimate(CommonArgs),
    /// Score estimates against realized production metrics.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// Previously written estimates.csv; estimated afresh when absent.
        #[arg(long)]
        estimates: Option<PathBuf>,
    },
    /// Mean absolute error as a function of chunk size.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated chunk sizes.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
    /// Generate a synthetic reference/production pair.
    Synth {
        /// TOML shift specification.
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the seed in the spec file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML run configuration; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub production: Option<PathBuf>,
    /// TOML column layout; inferred from the reference header when absent.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long)]
    pub chunk_size: Option<usize>,
    #[arg(long)]
    pub step: Option<usize>,
    /// Comma-separated metrics (accuracy, f1, precision, recall, auroc).
    #[arg(long, value_delimiter = ',')]
    pub metrics: Option<Vec<MetricKind>>,
    /// Comma-separated methods (test_set, rt_mod, atc, doc, cbpe, iw, pape).
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses all available cores.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub weight_clip: Option<f64>,
    #[arg(long)]
    pub doc_resamples: Option<usize>,
    #[arg(long)]
    pub n_boot: Option<usize>,
}

/// Effective settings of a run, loadable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub reference: Option<PathBuf>,
    pub production: Option<PathBuf>,
    pub schema: Option<DatasetSchema>,
    pub chunk_size: usize,
    /// Defaults to the chunk size (the sweep defaults to 1000).
    pub step: Option<usize>,
    pub metrics: Vec<MetricKind>,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub weight_clip: f64,
    pub doc_resamples: usize,
    pub n_boot: usize,
    pub bucket_width: f64,
    pub sizes: Vec<usize>,
    #[serde(skip_serializing)]
    pub out: PathBuf,
    #[serde(skip_serializing)]
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let est = EstimatorConfig::default();
        RunConfig {
            reference: None,
            production: None,
            schema: None,
            chunk_size: est.chunk_size,
            step: None,
            metrics: MetricKind::ALL.to_vec(),
            methods: Method::ALL.to_vec(),
            seed: 0,
            weight_clip: est.dre.weight_clip,
            doc_resamples: est.doc.n_resamples,
            n_boot: DEFAULT_N_BOOT,
            bucket_width: DEFAULT_BUCKET_WIDTH,
            sizes: DEFAULT_SWEEP_SIZES.to_vec(),
            out: PathBuf::from("out"),
            workers: 0,
        }
    }
}

impl RunConfig {
    pub fn from_toml(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Config file (if any) overlaid with the flags that were given.
    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let mut c = match &args.config {
            Some(p) => Self::from_toml(p)?,
            None => Self::default(),
        };
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = args.$field.clone() {
                    c.$field = v;
                }
            )*};
        }
        take!(chunk_size, metrics, methods, seed, out, workers, weight_clip, doc_resamples, n_boot);
        if let Some(p) = &args.reference {
            c.reference = Some(p.clone());
        }
        if let Some(p) = &args.production {
            c.production = Some(p.clone());
        }
        if let Some(s) = args.step {
            c.step = Some(s);
        }
        if let Some(p) = &args.schema {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            c.schema = Some(toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?);
        }
        c.check()?;
        Ok(c)
    }

    fn check(&self) -> Result<()> {
        if self.chunk_size == 0 || self.step == Some(0) {
            return Err(Error::Config("chunk size and step must be at least 1".into()));
        }
        if self.metrics.is_empty() || self.methods.is_empty() {
            return Err(Error::Config("at least one metric and one method are required".into()));
        }
        if !(self.weight_clip > 0.0) || self.n_boot < 2 || self.doc_resamples == 0 {
            return Err(Error::Config("weight_clip, n_boot and doc_resamples must be positive (n_boot >= 2)".into()));
        }
        if !(self.bucket_width > 0.0) {
            return Err(Error::Config("bucket_width must be positive".into()));
        }
        Ok(())
    }

    pub fn step(&self) -> usize {
        self.step.unwrap_or(self.chunk_size)
    }

    pub fn estimator(&self) -> EstimatorConfig {
        let mut e = EstimatorConfig::default().with_chunk_size(self.chunk_size);
        e.dre.weight_clip = self.weight_clip;
        e.doc.n_resamples = self.doc_resamples;
        e.seed = self.seed;
        e
    }

    pub fn evaluation(&self) -> EvaluationConfig {
        EvaluationConfig {
            estimator: self.estimator(),
            n_boot: self.n_boot,
            bucket_width: self.bucket_width,
        }
    }

    fn schema(&self) -> Result<DatasetSchema> {
        match (&self.schema, &self.reference) {
            (Some(s), _) => Ok(s.clone()),
            (None, Some(r)) => infer_schema(r),
            (None, None) => Err(Error::Config("--reference is required".into())),
        }
    }

    fn load(&self, role: Role) -> Result<ScoredDataset> {
        let (path, flag) = match role {
            Role::Reference => (&self.reference, "--reference"),
            Role::Production => (&self.production, "--production"),
        };
        let path = path.as_ref().ok_or_else(|| Error::Config(format!("{flag} is required")))?;
        load_dataset(path, &self.schema()?, role)
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
    }

    fn case_id(&self) -> String {
        self.production
            .as_ref()
            .and_then(|p| p.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "case".into())
    }
}

/// Parses arguments and runs the command, returning the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Validate(a) => cmd_validate(&RunConfig::resolve(&a)?),
        Command::Estimate(a) => cmd_estimate(&RunConfig::resolve(&a)?).map(|_| 0),
        Command::Evaluate { common, estimates } => {
            cmd_evaluate(&RunConfig::resolve(&common)?, estimates.as_deref()).map(|_| 0)
        }
        Command::Sweep { common, sizes } => {
            let mut c = RunConfig::resolve(&common)?;
            if let Some(s) = sizes {
                c.sizes = s;
            }
            cmd_sweep(&c).map(|_| 0)
        }
        Command::Synth { spec, seed, out } => {
            cmd_synth(&spec, seed, out.as_deref().unwrap_or(Path::new("out"))).map(|_| 0)
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a C,
}

fn write_manifest<C: Serialize>(dir: &Path, command: &str, seed: u64, config: &C) -> Result<()> {
    let m = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed,
        config,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&m).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

struct Table {
    path: PathBuf,
    writer: csv::Writer<fs::File>,
}

impl Table {
    fn create(dir: &Path, name: &str, header: &[&str]) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(name);
        let writer = csv::Writer::from_path(&path).map_err(|e| csv_io(&path, e))?;
        let mut t = Table { path, writer };
        t.row(header.iter().map(|s| s.to_string()))?;
        Ok(t)
    }

    fn row(&mut self, fields: impl IntoIterator<Item = String>) -> Result<()> {
        let fields: Vec<String> = fields.into_iter().collect();
        self.writer.write_record(&fields).map_err(|e| csv_io(&self.path, e))
    }

    fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Prints filtering results for the reference (and production, when
/// given). Returns exit code 1 when the case would be rejected.
pub fn cmd_validate(config: &RunConfig) -> Result<i32> {
    let reference = config.load(Role::Reference)?;
    println!("reference: {} rows, {} features", reference.n_rows(), reference.n_features());
    if config.production.is_some() {
        let production = config.load(Role::Production)?;
        let chunks = if production.n_rows() < config.chunk_size {
            0
        } else {
            (production.n_rows() - config.chunk_size) / config.step() + 1
        };
        println!(
            "production: {} rows, {} chunks, {}",
            production.n_rows(),
            chunks,
            if production.labels().is_some() { "labelled" } else { "unlabelled" }
        );
    }
    let view = reference.view();
    let mut verdict = filter_reference(&view, config.chunk_size, &[]);
    if verdict.is_accept() {
        let se = config.pool()?.install(|| {
            crate::evaluation::bootstrap_se_multi(
                &view,
                &config.metrics,
                config.chunk_size,
                config.n_boot,
                case_bootstrap_seed(config.seed, 0),
            )
        })?;
        let se: Vec<_> = config.metrics.iter().copied().zip(se.into_iter().map(|r| r.map_err(|e| e.to_string()))).collect();
        for (kind, r) in &se {
            match r {
                Ok(v) => println!("se {kind}: {v}"),
                Err(e) => println!("se {kind}: undefined ({e})"),
            }
        }
        verdict = filter_reference(&view, config.chunk_size, &se);
    }
    Ok(match verdict {
        Verdict::Accept => {
            println!("accept");
            0
        }
        Verdict::Reject(reason) => {
            println!("reject: {reason}");
            1
        }
    })
}

pub const ESTIMATES_FILE: &str = "estimates.csv";

/// Writes `estimates.csv`: one row per (chunk, metric, method).
pub fn cmd_estimate(config: &RunConfig) -> Result<()> {
    let reference = config.load(Role::Reference)?;
    let production = config.load(Role::Production)?;
    let suite = EstimatorSuite::fit(reference.view(), &config.metrics, &config.methods, config.estimator())?;
    let records = config
        .pool()?
        .install(|| estimate_chunks(&suite, &production.view(), config.chunk_size, config.step()))?;
    let labelled = production.labels().is_some();
    let mut header = vec!["chunk_index", "start_index", "size", "metric", "method", "estimate"];
    if labelled {
        header.push("realized");
    }
    header.extend(["warnings", "error"]);
    let mut t = Table::create(&config.out, ESTIMATES_FILE, &header)?;
    for rec in &records {
        for est in &rec.estimates {
            let mut row = vec![
                rec.chunk_index.to_string(),
                rec.start_index.to_string(),
                rec.size.to_string(),
                est.kind.to_string(),
                est.method.to_string(),
                opt(est.result.as_ref().ok().map(|e| e.value)),
            ];
            if let Some(realized) = &rec.realized {
                let r = realized.iter().find(|(k, _)| *k == est.kind).and_then(|(_, v)| v.as_ref().ok());
                row.push(opt(r));
            }
            row.push(est.result.as_ref().map(|e| e.warning_string()).unwrap_or_default());
            row.push(est.result.as_ref().err().map(|e| e.to_string()).unwrap_or_default());
            t.row(row)?;
        }
    }
    t.finish()?;
    write_manifest(&config.out, "estimate", config.seed, config)
}

/// Writes `report.csv`, `buckets.csv`, `se.csv` and `audit.csv`.
pub fn cmd_evaluate(config: &RunConfig, estimates: Option<&Path>) -> Result<EvaluationReport> {
    let reference = config.load(Role::Reference)?;
    let production = config.load(Role::Production)?;
    let case = EvaluationCase::new(config.case_id(), reference, production, config.chunk_size, config.step())?;
    let report = config.pool()?.install(|| match estimates {
        None => evaluate_cases(vec![case], &config.metrics, &config.methods, &config.evaluation()),
        Some(path) => evaluate_from_file(case, path, config),
    })?;
    write_report(&config.out, &report)?;
    write_manifest(&config.out, "evaluate", config.seed, config)?;
    Ok(report)
}

/// Realized value and per-method estimates of one (chunk, metric).
type ChunkGroup = (Option<f64>, Vec<(Method, f64)>);

fn evaluate_from_file(case: EvaluationCase, path: &Path, config: &RunConfig) -> Result<EvaluationReport> {
    let kinds = &config.metrics;
    let case = case.with_bootstrap(kinds, config.n_boot, case_bootstrap_seed(config.seed, 0))?;
    let mut report = EvaluationReport::default();
    for &kind in kinds {
        let (se, error) = match case.se_table().iter().find(|(k, _)| *k == kind).map(|(_, r)| r) {
            Some(Ok(v)) => (Some(*v), None),
            Some(Err(e)) => (None, Some(e.clone())),
            None => (None, None),
        };
        report.se.push(crate::evaluation::SeRow {
            case_id: case.id.clone(),
            kind,
            se,
            error,
            n_chunks: case.n_chunks(),
        });
    }
    let audit = |chunk_index, kind, method, status, reason: String| AuditEntry {
        case_id: case.id.clone(),
        chunk_index,
        kind,
        method,
        status,
        reason,
    };
    if let Verdict::Reject(reason) = crate::evaluation::filter_case(&case) {
        report.audit.push(audit(None, None, None, AuditStatus::Rejected, reason));
        return Ok(report);
    }
    report
        .audit
        .push(audit(None, None, None, AuditStatus::Accepted, format!("{} chunks", case.n_chunks())));

    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    let headers = reader.headers().map_err(|e| csv_io(path, e))?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Schema {
            column: name.into(),
            problem: format!("not found in {}", path.display()),
        })
    };
    let (ci, mi, me, es, re, er) = (col("chunk_index")?, col("metric")?, col("method")?, col("estimate")?, col("realized")?, col("error")?);
    let parse_f = |s: &str, row: usize| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| Error::at_row(row, format!("`{s}` is not a number")))
        }
    };
    let mut groups: BTreeMap<(usize, MetricKind), ChunkGroup> = BTreeMap::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let chunk: usize = rec[ci].parse().map_err(|_| Error::at_row(row, "bad chunk_index"))?;
        let kind: MetricKind = rec[mi].parse()?;
        let method: Method = rec[me].parse()?;
        if !kinds.contains(&kind) || !config.methods.contains(&method) {
            continue;
        }
        let entry = groups.entry((chunk, kind)).or_default();
        entry.0 = parse_f(&rec[re], row)?;
        match parse_f(&rec[es], row)? {
            Some(v) => entry.1.push((method, v)),
            None => report.audit.push(audit(
                Some(chunk),
                Some(kind),
                Some(method),
                AuditStatus::Skipped,
                rec[er].to_string(),
            )),
        }
    }
    let r = case.reference.view();
    let labels = r.require_labels()?;
    for ((chunk, kind), (realized, estimates)) in groups {
        let Some(realized) = realized else {
            report.audit.push(audit(
                Some(chunk),
                Some(kind),
                None,
                AuditStatus::Skipped,
                "realized value undefined".into(),
            ));
            continue;
        };
        let se = case
            .se(kind)
            .ok_or_else(|| Error::SeUndefined(format!("no standard error for {kind}")))?;
        report.points.push(EstimationPoint {
            case_id: case.id.clone(),
            chunk_index: chunk,
            kind,
            realized,
            reference: realized_metric(kind, labels, r.predictions(), r.scores())?,
            se,
            estimates,
        });
    }
    let (summary, buckets) = summarize(&report.points, &config.methods, kinds, config.bucket_width)?;
    report.summary = summary;
    report.buckets = buckets;
    Ok(report)
}

/// Writes the report tables into `dir`.
pub fn write_report(dir: &Path, report: &EvaluationReport) -> Result<()> {
    let mut t = Table::create(dir, "report.csv", &["method", "metric", "maste", "rmsste", "n_points"])?;
    for r in &report.summary {
        t.row([r.method.to_string(), r.kind.to_string(), r.maste.to_string(), r.rmsste.to_string(), r.n_points.to_string()])?;
    }
    t.finish()?;

    let mut t = Table::create(dir, "buckets.csv", &["method", "metric", "center", "maste", "count"])?;
    for b in &report.buckets {
        t.row([
            b.method.to_string(),
            b.kind.to_string(),
            b.bucket.center.to_string(),
            b.bucket.maste.to_string(),
            b.bucket.count.to_string(),
        ])?;
    }
    t.finish()?;

    let mut t = Table::create(dir, "se.csv", &["case_id", "metric", "se", "error", "n_chunks"])?;
    for s in &report.se {
        t.row([s.case_id.clone(), s.kind.to_string(), opt(s.se), s.error.clone().unwrap_or_default(), s.n_chunks.to_string()])?;
    }
    t.finish()?;

    let mut t = Table::create(dir, "audit.csv", &["case_id", "chunk_index", "metric", "method", "status", "reason"])?;
    for a in &report.audit {
        t.row([
            a.case_id.clone(),
            opt(a.chunk_index),
            opt(a.kind),
            opt(a.method),
            a.status.name().to_string(),
            a.reason.clone(),
        ])?;
    }
    t.finish()
}

/// Writes `sweep.csv`.
pub fn cmd_sweep(config: &RunConfig) -> Result<()> {
    let reference = config.load(Role::Reference)?;
    let production = config.load(Role::Production)?;
    let step = config.step.unwrap_or(DEFAULT_SWEEP_STEP);
    let case = EvaluationCase::new(config.case_id(), reference, production, config.chunk_size, step)?;
    let rows = config.pool()?.install(|| {
        sample_size_sweep(&case, &config.metrics, &config.sizes, step, &config.methods, &config.estimator())
    })?;
    let mut t = Table::create(&config.out, "sweep.csv", &["size", "method", "metric", "mae", "n_chunks", "note"])?;
    for r in &rows {
        t.row([r.size.to_string(), r.method.to_string(), r.kind.to_string(), opt(r.mae), r.n_chunks.to_string(), r.note.clone()])?;
    }
    t.finish()?;
    write_manifest(&config.out, "sweep", config.seed, config)
}

/// Writes `reference.csv`, `production.csv` and `oracle.csv` for the spec.
pub fn cmd_synth(spec_path: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let text = fs::read_to_string(spec_path).map_err(|e| Error::io(spec_path, e))?;
    let mut spec: ShiftSpec = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", spec_path.display())))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let pair = generate(&spec)?;
    write_pair(out, &pair)?;
    write_manifest(out, "synth", spec.seed, &spec)
}
