//! File-based monitoring: load a reference and an unlabeled production
//! CSV with an explicit schema and estimate every chunk.
//!
//! Run with `cargo run --example csv_monitoring -- reference.csv production.csv`;
//! without arguments a synthetic pair is written to a temporary directory.

use std::path::PathBuf;

use pape::data::{load_dataset, DatasetSchema, Role};
use pape::estimators::{EstimatorConfig, EstimatorSuite, Method};
use pape::evaluation::estimate_chunks;
use pape::metrics::MetricKind;
use pape::synthetic::{generate, write_pair, ShiftSpec};

fn main() -> pape::Result<()> {
    let args: Vec<PathBuf> = std::env::args_os().skip(1).map(PathBuf::from).collect();
    let (reference_path, production_path) = match &args[..] {
        [r, p] => (r.clone(), p.clone()),
        _ => {
            let dir = std::env::temp_dir().join("pape-csv-example");
            let mut spec = ShiftSpec::new(vec![1.0, -0.5], 8000, 6000, 2);
            spec.shift = vec![0.8, 0.0];
            write_pair(&dir, &generate(&spec)?)?;
            (dir.join("reference.csv"), dir.join("production.csv"))
        }
    };

    let schema = pape::data::infer_schema(&reference_path)?;
    let unlabeled = DatasetSchema {
        label_column: None,
        ..schema.clone()
    };
    let reference = load_dataset(&reference_path, &schema, Role::Reference)?;
    let production = load_dataset(&production_path, &unlabeled, Role::Production)?;
    println!("features: {:?}", schema.feature_columns);

    let kinds = [MetricKind::Accuracy, MetricKind::Precision, MetricKind::Recall];
    let suite = EstimatorSuite::fit(reference.view(), &kinds, &[Method::Pape], EstimatorConfig::default())?;
    for rec in estimate_chunks(&suite, &production.view(), 2000, 2000)? {
        let values: Vec<String> = rec
            .estimates
            .iter()
            .map(|e| match &e.result {
                Ok(v) => format!("{} {:.4}", e.kind, v.value),
                Err(err) => format!("{} failed ({err})", e.kind),
            })
            .collect();
        println!("rows {:>5}..{:<5} {}", rec.start_index, rec.start_index + rec.size, values.join(", "));
    }
    Ok(())
}
