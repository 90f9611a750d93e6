//! Classifier-based density ratios between reference and production
//! inputs, with and without shift.

use pape::density_ratio::{fit_dre, DreConfig};
use pape::synthetic::{generate, ShiftSpec};

fn main() -> pape::Result<()> {
    for shift in [0.0, 0.5, 1.5, 4.0] {
        let mut spec = ShiftSpec::new(vec![1.0, -1.0], 5000, 2000, 3);
        spec.shift = vec![shift, 0.0];
        let pair = generate(&spec)?;
        let (r, p) = (pair.reference.view(), pair.production.view());
        let model = fit_dre(r.features(), p.features(), r.n_features(), &DreConfig::default(), 0)?;
        let w = model.estimate_weights(r.features())?;
        println!(
            "shift {shift:>3}: discrimination AUROC {:.3}, mean weight {:.3}, ESS {:>7.1}, clipped {:.4}, coverage warning {}",
            model.discrimination_auroc(),
            w.mean(),
            w.effective_sample_size(),
            w.clipped_fraction,
            model.coverage_warning(),
        );
    }
    Ok(())
}
