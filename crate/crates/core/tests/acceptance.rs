use std::io::Write;

use pape::calibration::diagnose_calibration;
use pape::data::split_chunks;
use pape::density_ratio::{fit_dre, ratio_from_probability, DreConfig};
use pape::estimators::{
    estimate_confusion, estimate_from_calibrated, expected_accuracy, fit_pape_chunk, EstimatorConfig, EstimatorSuite,
    Method,
};
use pape::evaluation::{
    bootstrap_se, estimate_chunks, evaluate_cases, maste, rmsste, rolling_maste, sample_size_sweep, EstimationPoint, EvaluationCase,
    EvaluationConfig, DEFAULT_SWEEP_SIZES, DEFAULT_SWEEP_STEP,
};
use pape::metrics::{realized_metric, Confusion, MetricKind};
use pape::synthetic::{generate, ShiftSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn report(n: u32, pass: bool, detail: String) {
    let line = format!("criterion {n}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    std::io::stdout().write_all(line.as_bytes()).unwrap();
    assert!(pass, "criterion {n} failed: {detail}");
}

#[test]
fn criterion_01_oracle_calibration_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(20..400);
        let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.4))).collect();
        let scores: Vec<f64> = labels
            .iter()
            .map(|&y| (rng.random::<f64>() * 0.7 + 0.3 * f64::from(y)).clamp(0.0, 1.0))
            .map(|s: f64| (s * 20.0).round() / 20.0)
            .collect();
        let preds: Vec<u8> = scores.iter().map(|&s| u8::from(s >= 0.5)).collect();
        let c: Vec<f64> = labels.iter().map(|&y| f64::from(y)).collect();
        for kind in MetricKind::ALL {
            let est = estimate_from_calibrated(kind, &c, &preds, &scores).unwrap().value;
            let real = realized_metric(kind, &labels, &preds, &scores).unwrap();
            worst = worst.max((est - real).abs());
        }
    }
    report(1, worst <= 1e-12, format!("max |estimate - realized| = {worst:e} over 50 instances x 5 metrics"));
}

fn enumerate(c: &[f64], f: impl Fn(&[u8]) -> f64) -> f64 {
    let n = c.len();
    let mut total = 0.0;
    let mut y = vec![0u8; n];
    for mask in 0u32..(1 << n) {
        let mut p = 1.0;
        for i in 0..n {
            y[i] = ((mask >> i) & 1) as u8;
            p *= if y[i] == 1 { c[i] } else { 1.0 - c[i] };
        }
        total += p * f(&y);
    }
    total
}

struct GapStats {
    worst_acc: f64,
    worst_f1: f64,
    mean_f1: f64,
}

fn expectation_gaps(seed: u64, sizes: std::ops::RangeInclusive<usize>, instances: usize) -> GapStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = GapStats {
        worst_acc: 0.0,
        worst_f1: 0.0,
        mean_f1: 0.0,
    };
    for _ in 0..instances {
        let n = rng.random_range(sizes.clone());
        let c: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let g: Vec<u8> = c.iter().map(|&p| u8::from(p >= 0.5)).collect();
        let exact = enumerate(&c, |y| Confusion::from_labels(y, &g).unwrap().accuracy());
        s.worst_acc = s.worst_acc.max((expected_accuracy(&c, &g).unwrap() - exact).abs());
        let exact_f1 = enumerate(&c, |y| Confusion::from_labels(y, &g).unwrap().f1());
        let gap = (estimate_confusion(&c, &g).unwrap().f1() - exact_f1).abs();
        s.worst_f1 = s.worst_f1.max(gap);
        s.mean_f1 += gap / instances as f64;
    }
    s
}

/// The F1 gap is gated on 8..=12 rows; with one or two rows the plug-in
/// ratio is far from its expectation (n = 1, c = 0.5 gives 2/3 vs 1/2), so
/// the full 1..=12 range is only reported.
#[test]
fn criterion_02_accuracy_is_an_exact_expectation() {
    let gated = expectation_gaps(2, 8..=12, 200);
    let full = expectation_gaps(3, 1..=12, 200);
    report(
        2,
        gated.worst_acc <= 1e-12 && full.worst_acc <= 1e-12 && gated.worst_f1 < 0.05,
        format!(
            "accuracy max error {:e}; F1 plug-in gap n in 8..=12: max {:.4} mean {:.4}; n in 1..=12: max {:.4} mean {:.4}",
            gated.worst_acc.max(full.worst_acc),
            gated.worst_f1,
            gated.mean_f1,
            full.worst_f1,
            full.mean_f1
        ),
    );
}

fn chunk_labels(d: &pape::data::DataView<'_>) -> Vec<u8> {
    d.labels().unwrap().to_vec()
}

#[test]
fn criterion_03_error_bounded_by_calibration_error() {
    let mut spec = ShiftSpec::new(vec![1.5, -1.0, 0.5], 20_000, 100_000, 31);
    spec.temperature = 2.0;
    spec.shift = vec![0.5, 0.5, 0.0];
    let pair = generate(&spec).unwrap();
    let reference = pair.reference.view();
    let production = pair.production.view();
    let chunks = split_chunks(production, 2000, 2000).unwrap();
    let mut within = 0;
    for c in &chunks {
        let view = c.view();
        let fit = fit_pape_chunk(&reference, &view, &DreConfig::default(), 0).unwrap();
        let estimate = expected_accuracy(&fit.calibrated, view.predictions()).unwrap();
        let y = chunk_labels(&view);
        let realized = realized_metric(MetricKind::Accuracy, &y, view.predictions(), view.scores()).unwrap();
        let eps = diagnose_calibration(&fit.calibrator, view.scores(), &y, None, 10)
            .unwrap()
            .expected_abs_error;
        let se = (realized * (1.0 - realized) / view.n_rows() as f64).sqrt();
        if (realized - estimate).abs() <= eps + 3.0 * se {
            within += 1;
        }
    }
    let frac = within as f64 / chunks.len() as f64;
    report(3, chunks.len() == 50 && frac >= 0.95, format!("{within}/{} chunks within eps + 3 SE", chunks.len()));
}

#[test]
fn criterion_04_no_shift_consistency() {
    let spec = ShiftSpec::new(vec![1.5, -1.0, 0.5], 20_000, 200_000, 41);
    let pair = generate(&spec).unwrap();
    let reference = pair.reference.view();
    let kinds = [MetricKind::Accuracy, MetricKind::Auroc];
    let methods = [Method::Pape, Method::Cbpe, Method::Iw];
    let se: Vec<f64> = kinds
        .iter()
        .map(|&k| bootstrap_se(&reference, k, 2000, 500, 7).unwrap())
        .collect();
    let suite = EstimatorSuite::fit(reference, &kinds, &methods, EstimatorConfig::default()).unwrap();
    let records = estimate_chunks(&suite, &pair.production.view(), 2000, 2000).unwrap();
    let mut worst: f64 = 1.0;
    let mut parts = Vec::new();
    for &method in &methods {
        for (k, &kind) in kinds.iter().enumerate() {
            let mut hits = 0;
            for rec in &records {
                let realized = rec.realized.as_ref().unwrap()[k].1.clone().unwrap();
                let est = rec
                    .estimates
                    .iter()
                    .find(|e| e.method == method && e.kind == kind)
                    .unwrap()
                    .result
                    .as_ref()
                    .unwrap()
                    .value;
                if (est - realized).abs() < 3.0 * se[k] {
                    hits += 1;
                }
            }
            let frac = hits as f64 / records.len() as f64;
            worst = worst.min(frac);
            parts.push(format!("{method}/{kind} {hits}/{}", records.len()));
        }
    }
    report(4, records.len() == 100 && worst >= 0.95, parts.join(", "));
}

fn omitted_feature_spec(shift: f64, temperature: f64, seed: u64) -> ShiftSpec {
    let mut spec = ShiftSpec::new(vec![1.0, 1.0, 0.5], 10_000, 20_000, seed);
    spec.model_beta = Some(vec![1.0, 0.0, 0.5]);
    spec.temperature = temperature;
    spec.shift = vec![0.25 * shift, shift, 0.0];
    spec
}

#[test]
fn criterion_05_pape_beats_test_set_and_cbpe() {
    let mut cases = Vec::new();
    for (i, &m) in [0.5, 1.0, 1.5, 2.0, 2.5].iter().enumerate() {
        for (j, &tau) in [0.5, 1.0, 2.0, 3.0].iter().enumerate() {
            let pair = generate(&omitted_feature_spec(m, tau, 500 + (i * 4 + j) as u64)).unwrap();
            cases.push(
                EvaluationCase::new(format!("shift{m}_t{tau}"), pair.reference, pair.production, 2000, 2000).unwrap(),
            );
        }
    }
    let methods = [Method::TestSet, Method::Cbpe, Method::Pape];
    let report_ = evaluate_cases(cases, &MetricKind::ALL, &methods, &EvaluationConfig::default()).unwrap();
    let rejected = report_
        .audit
        .iter()
        .filter(|a| a.status == pape::evaluation::AuditStatus::Rejected)
        .count();
    let mut pass = rejected == 0;
    let mut parts = Vec::new();
    for kind in MetricKind::ALL {
        let p = report_.maste(Method::Pape, kind).unwrap();
        let t = report_.maste(Method::TestSet, kind).unwrap();
        let c = report_.maste(Method::Cbpe, kind).unwrap();
        pass &= p < t;
        if kind == MetricKind::Accuracy {
            pass &= p <= c;
        }
        parts.push(format!("{kind}: pape {p:.3} cbpe {c:.3} test_set {t:.3}"));
    }
    report(5, pass, format!("{rejected} cases rejected; {}", parts.join("; ")));
}

#[test]
fn criterion_06_gaussian_errors_give_root_two_over_pi() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let points: Vec<EstimationPoint> = (0..20_000)
        .map(|j| {
            let se = rng.random_range(0.005..0.05);
            let realized = rng.random_range(0.6..0.9);
            let z: f64 = StandardNormal.sample(&mut rng);
            EstimationPoint {
                case_id: format!("c{}", j % 40),
                chunk_index: j / 40,
                kind: MetricKind::Accuracy,
                realized,
                reference: 0.75,
                se,
                estimates: vec![(Method::Pape, realized + se * z)],
            }
        })
        .collect();
    let m = maste(&points, Method::Pape, MetricKind::Accuracy).unwrap();
    let target = (2.0 / std::f64::consts::PI).sqrt();
    report(6, (m - target).abs() <= 0.05, format!("MASTE {m:.4} vs {target:.4} over {} points", points.len()));
}

#[test]
fn criterion_07_density_ratio_identity() {
    let spec = ShiftSpec::new(vec![1.0, -0.5, 0.25], 5000, 5000, 71);
    let pair = generate(&spec).unwrap();
    let config = DreConfig::default();
    let (r, p) = (pair.reference.view(), pair.production.view());
    let model = fit_dre(r.features(), p.features(), r.n_features(), &config, 0).unwrap();
    let weights = model.estimate_weights(r.features()).unwrap();
    let probs = model.production_probability(r.features()).unwrap();
    let worst = probs
        .iter()
        .zip(&weights.values)
        .map(|(&q, &w)| (ratio_from_probability(q, r.n_rows(), p.n_rows()).min(config.weight_clip) - w).abs())
        .fold(0.0, f64::max);
    let mean = weights.mean();
    let auc = model.discrimination_auroc();
    report(
        7,
        (0.9..=1.1).contains(&mean) && (0.45..=0.55).contains(&auc) && worst <= 1e-12,
        format!("mean weight {mean:.4}, DRE AUROC {auc:.4}, recomputation error {worst:e}"),
    );
}

fn acc_point(case: &str, j: usize, realized: f64, reference: f64, se: f64, est: f64) -> EstimationPoint {
    EstimationPoint {
        case_id: case.into(),
        chunk_index: j,
        kind: MetricKind::Accuracy,
        realized,
        reference,
        se,
        estimates: vec![(Method::Pape, est)],
    }
}

#[test]
fn criterion_08_evaluation_formulas() {
    let a = MetricKind::Accuracy;
    let pts = vec![acc_point("a", 0, 0.80, 0.80, 0.02, 0.81), acc_point("a", 1, 0.80, 0.80, 0.02, 0.77)];
    let m = maste(&pts, Method::Pape, a).unwrap();
    let r = rmsste(&pts, Method::Pape, a).unwrap();
    let worked = (m - 1.0).abs() < 1e-9 && (r - 1.25f64.sqrt()).abs() < 1e-9;

    let pts = vec![acc_point("a", 0, 0.81, 0.80, 0.02, 0.81), acc_point("a", 1, 0.86, 0.80, 0.02, 0.86)];
    let buckets = rolling_maste(&pts, Method::Pape, a, 2.0).unwrap();
    let bucketed = buckets.len() == 2
        && (buckets[0].center, buckets[0].count) == (1.0, 1)
        && (buckets[1].center, buckets[1].count) == (3.0, 1);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut violations = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..50);
        let pts: Vec<EstimationPoint> = (0..n)
            .map(|j| {
                let realized = rng.random::<f64>();
                acc_point("r", j, realized, 0.5, rng.random_range(0.001..0.1), rng.random::<f64>())
            })
            .collect();
        if rmsste(&pts, Method::Pape, a).unwrap() < maste(&pts, Method::Pape, a).unwrap() - 1e-12 {
            violations += 1;
        }
    }
    report(
        8,
        worked && bucketed && violations == 0,
        format!("MASTE {m}, RMSSTE {r:.4}; buckets {buckets:?}; {violations} RMSSTE < MASTE violations in 1000 sets"),
    );
}

#[test]
fn criterion_09_sweep_error_shrinks_with_size() {
    let mut spec = omitted_feature_spec(0.5, 2.0, 91);
    spec.n_ref = 20_000;
    spec.n_prod = 100_000;
    let pair = generate(&spec).unwrap();
    let case = EvaluationCase::new("sweep", pair.reference, pair.production, 2000, DEFAULT_SWEEP_STEP).unwrap();
    let methods = [Method::Pape, Method::TestSet];
    let rows = sample_size_sweep(
        &case,
        &[MetricKind::Accuracy],
        &DEFAULT_SWEEP_SIZES,
        DEFAULT_SWEEP_STEP,
        &methods,
        &EstimatorConfig::default(),
    )
    .unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for method in methods {
        let mae: Vec<f64> = rows.iter().filter(|r| r.method == method).map(|r| r.mae.unwrap()).collect();
        let inversions = mae.windows(2).filter(|w| w[1] > w[0]).count();
        pass &= mae.len() == DEFAULT_SWEEP_SIZES.len() && inversions <= 1;
        let shown: Vec<String> = mae.iter().map(|v| format!("{v:.4}")).collect();
        parts.push(format!("{method} [{}] {inversions} inversions", shown.join(", ")));
    }
    report(9, pass, parts.join("; "));
}

fn pape_cmd(args: &[&str]) -> std::process::Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_pape")).args(args).output().unwrap()
}

fn dir_contents(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_10_cli_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let spec = root.join("spec.toml");
    std::fs::write(
        &spec,
        "n_features = 3\nbeta = [1.0, 1.0, 0.5]\nmodel_beta = [1.0, 0.0, 0.5]\nshift = [0.2, 1.0, 0.0]\n\
         temperature = 2.0\nn_ref = 6000\nn_prod = 6000\nseed = 10\n",
    )
    .unwrap();
    let s = |p: std::path::PathBuf| p.to_string_lossy().into_owned();
    let mut checked = Vec::new();
    let mut pass = true;

    let synth: Vec<_> = ["d1", "d2"]
        .iter()
        .map(|d| {
            let out = pape_cmd(&["synth", "--spec", &s(spec.clone()), "--out", &s(root.join(d))]);
            pass &= out.status.success();
            dir_contents(&root.join(d))
        })
        .collect();
    pass &= synth[0] == synth[1];
    checked.push("synth");

    let data = root.join("d1");
    let reference = s(data.join("reference.csv"));
    let production = s(data.join("production.csv"));
    let common = |out: &str, workers: &str| -> Vec<String> {
        [
            "--reference",
            &reference,
            "--production",
            &production,
            "--chunk-size",
            "1000",
            "--seed",
            "5",
            "--n-boot",
            "100",
            "--workers",
            workers,
            "--out",
            &s(root.join(out)),
        ]
        .iter()
        .map(|v| v.to_string())
        .collect()
    };
    for cmd in ["validate", "estimate", "evaluate", "sweep"] {
        let runs: Vec<_> = [("1", "a"), ("4", "b"), ("4", "c")]
            .iter()
            .map(|(w, tag)| {
                let dir = format!("{cmd}_{tag}");
                let mut args = vec![cmd.to_string()];
                args.extend(common(&dir, w));
                if cmd == "sweep" {
                    args.extend(["--sizes", "100,500,1000"].map(String::from));
                }
                let argv: Vec<&str> = args.iter().map(String::as_str).collect();
                let out = pape_cmd(&argv);
                pass &= out.status.success();
                let files = if root.join(&dir).exists() { dir_contents(&root.join(&dir)) } else { Vec::new() };
                (out.stdout, files)
            })
            .collect();
        pass &= runs.windows(2).all(|w| w[0] == w[1]);
        pass &= cmd == "validate" || !runs[0].1.is_empty();
        checked.push(cmd);
    }
    report(10, pass, format!("byte-identical outputs across reruns and 1/4 workers for {}", checked.join(", ")));
}
