//! MASTE / RMSSTE over a small suite of shifted cases, plus the rolling
//! change buckets and the filtering audit trail.

use pape::estimators::Method;
use pape::evaluation::{evaluate_cases, EvaluationCase, EvaluationConfig};
use pape::metrics::MetricKind;
use pape::synthetic::{generate, ShiftSpec};

fn main() -> pape::Result<()> {
    let mut cases = Vec::new();
    for (i, shift) in [0.0, 1.0, 2.0].into_iter().enumerate() {
        let mut spec = ShiftSpec::new(vec![1.0, 1.0, 0.5], 10_000, 10_000, 40 + i as u64);
        spec.model_beta = Some(vec![1.0, 0.0, 0.5]);
        spec.temperature = 1.5;
        spec.shift = vec![0.0, shift, 0.0];
        let pair = generate(&spec)?;
        cases.push(EvaluationCase::new(format!("shift{shift}"), pair.reference, pair.production, 2000, 2000)?);
    }
    let small = generate(&ShiftSpec::new(vec![1.0, 1.0, 0.5], 4000, 4000, 9))?;
    cases.push(EvaluationCase::new("too_small", small.reference, small.production, 2000, 2000)?);

    let methods = [Method::TestSet, Method::Cbpe, Method::Iw, Method::Pape];
    let kinds = [MetricKind::Accuracy, MetricKind::F1, MetricKind::Auroc];
    let report = evaluate_cases(cases, &kinds, &methods, &EvaluationConfig::default())?;

    println!("method    metric    maste  rmsste  n");
    for r in &report.summary {
        println!("{:<9} {:<9} {:.3}  {:.3}   {}", r.method, r.kind, r.maste, r.rmsste, r.n_points);
    }
    println!("\naccuracy buckets (|change| in SE)");
    for b in report.buckets.iter().filter(|b| b.kind == MetricKind::Accuracy) {
        println!("{:<9} center {:>4}  maste {:.3}  n {}", b.method, b.bucket.center, b.bucket.maste, b.bucket.count);
    }
    println!("\naudit");
    for a in &report.audit {
        println!("{} {}: {}", a.case_id, a.status.name(), a.reason);
    }
    Ok(())
}
