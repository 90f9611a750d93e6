//! Synthetic data with known ground truth: population performance before
//! and after a shift, and the files the `synth` command writes.

use pape::metrics::MetricKind;
use pape::synthetic::{generate, true_performance, write_pair, ShiftSpec};

fn main() -> pape::Result<()> {
    let mut spec = ShiftSpec::new(vec![2.0, 0.5], 2000, 2000, 1);
    spec.temperature = 2.0;
    for shift in [0.0, 1.0, 2.0] {
        spec.shift = vec![shift, 0.0];
        let acc = true_performance(&spec, MetricKind::Accuracy, 200_000, 2)?;
        let auc = true_performance(&spec, MetricKind::Auroc, 200_000, 2)?;
        println!(
            "shift {shift}: accuracy {:.4} (+/- {:.4}), AUROC {:.4} (+/- {:.4})",
            acc.value, acc.std_error, auc.value, auc.std_error
        );
    }

    let pair = generate(&spec)?;
    let s = pair.production.scores()[0];
    println!(
        "first production row: score {s:.3}, true probability {:.3}, ideal calibration {:.3}",
        pair.oracle.production_probability[0],
        pair.oracle.calibration(s).unwrap_or(f64::NAN),
    );
    let dir = std::env::temp_dir().join("pape-synthetic-example");
    write_pair(&dir, &pair)?;
    println!("wrote reference.csv, production.csv, oracle.csv to {}", dir.display());
    Ok(())
}
