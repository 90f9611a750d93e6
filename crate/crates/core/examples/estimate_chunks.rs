//! PAPE accuracy and F1 estimates per production chunk, next to the
//! realized values that are normally unavailable.

use pape::data::split_chunks;
use pape::density_ratio::DreConfig;
use pape::estimators::pape_estimate;
use pape::metrics::{realized_metric, MetricKind};
use pape::synthetic::{generate, ShiftSpec};

fn main() -> pape::Result<()> {
    let mut spec = ShiftSpec::new(vec![1.0, 1.0, 0.5], 12_000, 10_000, 7);
    spec.model_beta = Some(vec![1.0, 0.0, 0.5]);
    spec.shift = vec![0.0, 1.5, 0.0];
    let pair = generate(&spec)?;
    let reference = pair.reference.view();

    println!("chunk  acc_est  acc_real  f1_est  f1_real");
    for chunk in split_chunks(pair.production.view(), 2000, 2000)? {
        let view = chunk.view();
        let y = view.require_labels()?;
        let mut row = format!("{:>5}", chunk.index);
        for kind in [MetricKind::Accuracy, MetricKind::F1] {
            let est = pape_estimate(kind, &reference, &view, &DreConfig::default(), 0)?;
            let real = realized_metric(kind, y, view.predictions(), view.scores())?;
            row += &format!("  {:.4}   {:.4}", est.value, real);
        }
        println!("{row}");
    }
    Ok(())
}
