//! Isotonic calibration of an overconfident model, plain and reweighted
//! towards a shifted production sample.

use pape::calibration::{diagnose_calibration, fit_unweighted_calibrator, fit_weighted_calibrator};
use pape::density_ratio::{fit_dre, DreConfig};
use pape::synthetic::{generate, ShiftSpec};

fn main() -> pape::Result<()> {
    let mut spec = ShiftSpec::new(vec![1.0, 1.0], 10_000, 4000, 11);
    spec.temperature = 0.5;
    spec.model_beta = Some(vec![1.0, 0.0]);
    spec.shift = vec![0.0, 1.5];
    let pair = generate(&spec)?;
    let (r, p) = (pair.reference.view(), pair.production.view());
    let y_ref = r.require_labels()?;
    let y_prod = p.require_labels()?;

    let plain = fit_unweighted_calibrator(r.scores(), y_ref)?;
    let dre = fit_dre(r.features(), p.features(), r.n_features(), &DreConfig::default(), 0)?;
    let weights = dre.estimate_weights(r.features())?;
    let weighted = fit_weighted_calibrator(r.scores(), y_ref, &weights.values)?;

    println!("score  unweighted  weighted");
    for s in [0.05, 0.2, 0.35, 0.5, 0.65, 0.8, 0.95] {
        println!("{s:>5}  {:>10.3}  {:>8.3}", plain.calibrate_one(s), weighted.calibrate_one(s));
    }
    for (name, cal) in [("unweighted", &plain), ("weighted", &weighted)] {
        let d = diagnose_calibration(cal, p.scores(), y_prod, None, 10)?;
        println!("{name}: expected |calibration error| on production {:.4}", d.expected_abs_error);
    }
    Ok(())
}
