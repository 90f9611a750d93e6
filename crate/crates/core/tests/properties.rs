use proptest::prelude::*;

use pape::calibration::{fit_unweighted_calibrator, fit_weighted_calibrator};
use pape::data::{split_chunks, Role, ScoredDataset};
use pape::estimators::{estimate_auroc, estimate_confusion, expected_accuracy, EstimatorConfig, Method};
use pape::evaluation::{
    evaluate_cases, maste, rmsste, rolling_maste, sample_size_sweep, EstimationPoint, EvaluationCase,
    EvaluationConfig,
};
use pape::learners::fit_monotone_map;
use pape::metrics::MetricKind;
use pape::synthetic::{generate, ShiftSpec};

fn points_strategy() -> impl Strategy<Value = Vec<EstimationPoint>> {
    prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.001f64..0.1, 0usize..5), 1..60).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(j, (realized, est, se, case))| EstimationPoint {
                case_id: format!("case{case}"),
                chunk_index: j,
                kind: MetricKind::Accuracy,
                realized,
                reference: 0.5,
                se,
                estimates: vec![(Method::Pape, est)],
            })
            .collect()
    })
}

const A: MetricKind = MetricKind::Accuracy;

proptest! {
    #[test]
    fn rmsste_dominates_maste(points in points_strategy()) {
        prop_assert!(rmsste(&points, Method::Pape, A).unwrap() >= maste(&points, Method::Pape, A).unwrap() - 1e-12);
    }

    #[test]
    fn maste_ignores_order_ids_and_duplication(points in points_strategy()) {
        let m = maste(&points, Method::Pape, A).unwrap();
        let r = rmsste(&points, Method::Pape, A).unwrap();
        let mut shuffled: Vec<EstimationPoint> = points.iter().rev().cloned().collect();
        for p in &mut shuffled {
            p.case_id = format!("renamed-{}", p.case_id);
        }
        prop_assert!((maste(&shuffled, Method::Pape, A).unwrap() - m).abs() < 1e-12);
        let doubled: Vec<EstimationPoint> = points.iter().chain(&points).cloned().collect();
        prop_assert!((maste(&doubled, Method::Pape, A).unwrap() - m).abs() < 1e-12);
        prop_assert!((rmsste(&doubled, Method::Pape, A).unwrap() - r).abs() < 1e-12);
    }

    #[test]
    fn bucket_counts_sum_to_points(points in points_strategy(), width in 0.5f64..4.0) {
        let buckets = rolling_maste(&points, Method::Pape, A, width).unwrap();
        prop_assert_eq!(buckets.iter().map(|b| b.count).sum::<usize>(), points.len());
        prop_assert!(buckets.windows(2).all(|w| w[0].center < w[1].center));
    }

    #[test]
    fn confusion_sums_to_one(c in prop::collection::vec(0.0f64..=1.0, 1..100), seed in 0u64..1000) {
        let g: Vec<u8> = c.iter().enumerate().map(|(i, _)| (i as u64 * 7 + seed).is_multiple_of(3) as u8).collect();
        let conf = estimate_confusion(&c, &g).unwrap();
        prop_assert!((conf.tp + conf.fp + conf.tn + conf.fn_ - 1.0).abs() < 1e-9);
        prop_assert!((expected_accuracy(&c, &g).unwrap() - (conf.tp + conf.tn)).abs() < 1e-9);
    }

    #[test]
    fn auroc_estimate_is_rank_based(pairs in prop::collection::vec((0.0f64..1.0, 0.05f64..0.95), 2..80)) {
        let scores: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let c: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let squashed: Vec<f64> = scores.iter().map(|s| s * s * s / 2.0 + 0.1).collect();
        let a = estimate_auroc(&c, &scores).unwrap();
        let b = estimate_auroc(&c, &squashed).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn calibrators_are_monotone_and_balanced(
        rows in prop::collection::vec((0.0f64..=1.0, any::<bool>(), 0.1f64..5.0), 1..120)
    ) {
        let s: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let y: Vec<u8> = rows.iter().map(|r| r.1 as u8).collect();
        let w: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let cal = fit_weighted_calibrator(&s, &y, &w).unwrap();
        let map = fit_monotone_map(&s, &y, &w).unwrap();
        prop_assert!(map.values().windows(2).all(|v| v[0] <= v[1]));
        let grid: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();
        let out = cal.calibrate(&grid).unwrap();
        prop_assert!(out.windows(2).all(|v| v[0] <= v[1] + 1e-15));
        let fitted = cal.calibrate(&s).unwrap();
        let total: f64 = w.iter().sum();
        let lhs: f64 = fitted.iter().zip(&w).map(|(c, w)| c * w).sum::<f64>() / total;
        let rhs: f64 = y.iter().zip(&w).map(|(y, w)| f64::from(*y) * w).sum::<f64>() / total;
        prop_assert!((lhs - rhs).abs() < 1e-6);

        let unit = vec![1.0; s.len()];
        let a = fit_unweighted_calibrator(&s, &y).unwrap().calibrate(&grid).unwrap();
        let b = fit_weighted_calibrator(&s, &y, &unit).unwrap().calibrate(&grid).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn disjoint_chunks_rebuild_a_prefix(n in 1usize..200, size in 1usize..40) {
        let scores: Vec<f64> = (0..n).map(|i| (i % 10) as f64 / 10.0).collect();
        let features: Vec<f64> = (0..2 * n).map(|i| i as f64).collect();
        let d = ScoredDataset::new(features.clone(), 2, scores, vec![0; n], None, Role::Production).unwrap();
        let chunks = split_chunks(d.view(), size, size).unwrap();
        let rebuilt: Vec<f64> = chunks.iter().flat_map(|c| c.view().features().to_vec()).collect();
        prop_assert_eq!(rebuilt.len(), 2 * (n / size) * size);
        prop_assert_eq!(&rebuilt[..], &features[..rebuilt.len()]);
    }
}

#[test]
fn score_bins_follow_the_ideal_calibrator() {
    let mut spec = ShiftSpec::new(vec![1.2, -0.8], 100_000, 1, 12);
    spec.temperature = 2.0;
    let pair = generate(&spec).unwrap();
    let s = pair.reference.scores();
    let y = pair.reference.labels().unwrap();
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let mut worst: f64 = 0.0;
    for bin in order.chunks(s.len() / 10) {
        let freq = bin.iter().map(|&i| f64::from(y[i])).sum::<f64>() / bin.len() as f64;
        let ideal = bin.iter().map(|&i| pair.oracle.calibration(s[i]).unwrap()).sum::<f64>() / bin.len() as f64;
        worst = worst.max((freq - ideal).abs());
    }
    assert!(worst < 0.03, "max bin deviation {worst}");
}

#[test]
fn test_set_maste_near_root_two_over_pi_without_shift() {
    let cases: Vec<EvaluationCase> = (0..4)
        .map(|i| {
            let pair = generate(&ShiftSpec::new(vec![1.0, -1.0, 0.5], 20_000, 40_000, 100 + i)).unwrap();
            EvaluationCase::new(format!("c{i}"), pair.reference, pair.production, 2000, 2000).unwrap()
        })
        .collect();
    let report = evaluate_cases(cases, &[A], &[Method::TestSet], &EvaluationConfig::default()).unwrap();
    let m = report.maste(Method::TestSet, A).unwrap();
    assert!((0.6..=1.0).contains(&m), "test set MASTE {m}");
}

#[test]
fn perfect_estimator_scores_zero() {
    let pair = generate(&ShiftSpec::new(vec![1.0, -1.0], 8000, 6000, 3)).unwrap();
    let case = EvaluationCase::new("c", pair.reference, pair.production, 2000, 2000).unwrap();
    let config = EvaluationConfig {
        n_boot: 100,
        ..EvaluationConfig::default()
    };
    let mut report = evaluate_cases(vec![case], &MetricKind::ALL, &[Method::TestSet], &config).unwrap();
    for p in &mut report.points {
        p.estimates = vec![(Method::Pape, p.realized)];
    }
    for kind in MetricKind::ALL {
        assert_eq!(maste(&report.points, Method::Pape, kind).unwrap(), 0.0);
        assert_eq!(rmsste(&report.points, Method::Pape, kind).unwrap(), 0.0);
    }
}

#[test]
fn test_set_sweep_error_scales_with_root_n() {
    let pair = generate(&ShiftSpec::new(vec![1.0, -1.0], 20_000, 200_000, 21)).unwrap();
    let case = EvaluationCase::new("s", pair.reference, pair.production, 2000, 1000).unwrap();
    let rows = sample_size_sweep(&case, &[A], &[100, 400], 1000, &[Method::TestSet], &EstimatorConfig::default()).unwrap();
    let ratio = rows[0].mae.unwrap() / rows[1].mae.unwrap();
    assert!((ratio - 2.0).abs() < 0.6, "ratio {ratio}");
}
