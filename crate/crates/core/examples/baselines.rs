//! Every estimation method on the same shifted chunks.

use pape::data::split_chunks;
use pape::estimators::{EstimatorConfig, EstimatorSuite, Method};
use pape::metrics::{realized_metric, MetricKind};
use pape::synthetic::{generate, ShiftSpec};

fn main() -> pape::Result<()> {
    let mut spec = ShiftSpec::new(vec![1.0, 1.0, 0.5], 12_000, 4000, 5);
    spec.model_beta = Some(vec![1.0, 0.0, 0.5]);
    spec.temperature = 2.0;
    spec.shift = vec![0.3, 1.5, 0.0];
    let pair = generate(&spec)?;
    let kinds = [MetricKind::Accuracy, MetricKind::Auroc];
    let suite = EstimatorSuite::fit(pair.reference.view(), &kinds, &Method::ALL, EstimatorConfig::default())?;

    for chunk in split_chunks(pair.production.view(), 2000, 2000)? {
        let view = chunk.view();
        println!("chunk {}", chunk.index);
        for kind in kinds {
            let real = realized_metric(kind, view.require_labels()?, view.predictions(), view.scores())?;
            println!("  {kind:<8} realized {real:.4}");
        }
        for e in suite.estimate_chunk(&view, chunk.start_index) {
            match e.result {
                Ok(est) => println!("  {:<8} {:<8} {:.4} {}", e.kind, e.method, est.value, est.warning_string()),
                Err(err) => println!("  {:<8} {:<8} failed: {err}", e.kind, e.method),
            }
        }
    }
    Ok(())
}
