//! Mean absolute error against chunk size for PAPE and the reference
//! value baseline.

use pape::estimators::{EstimatorConfig, Method};
use pape::evaluation::{sample_size_sweep, EvaluationCase, DEFAULT_SWEEP_SIZES, DEFAULT_SWEEP_STEP};
use pape::metrics::MetricKind;
use pape::synthetic::{generate, ShiftSpec};

fn main() -> pape::Result<()> {
    let mut spec = ShiftSpec::new(vec![1.0, 1.0, 0.5], 20_000, 60_000, 17);
    spec.model_beta = Some(vec![1.0, 0.0, 0.5]);
    spec.shift = vec![0.0, 1.0, 0.0];
    let pair = generate(&spec)?;
    let case = EvaluationCase::new("sweep", pair.reference, pair.production, 2000, DEFAULT_SWEEP_STEP)?;
    let rows = sample_size_sweep(
        &case,
        &[MetricKind::Accuracy],
        &DEFAULT_SWEEP_SIZES,
        DEFAULT_SWEEP_STEP,
        &[Method::TestSet, Method::Cbpe, Method::Pape],
        &EstimatorConfig::default(),
    )?;
    println!("size  method    mae     chunks");
    for r in rows {
        let mae = r.mae.map(|m| format!("{m:.4}")).unwrap_or_else(|| "-".into());
        println!("{:>4}  {:<8}  {mae:<6}  {}", r.size, r.method, r.n_chunks);
    }
    Ok(())
}
