//! Metric functions against brute-force recomputation on seeded random
//! instances.

mod common;

use common::{confusion_loop, f1_threshold_sweep, pairwise_auc};
use lvsnet::objectives::{
    binarize, confusion, f1_threshold, metrics_from_counts, multiclass_report, roc_auc, ConfusionCounts, MetricReport,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const INSTANCES: u64 = 200;
const PIXELS: usize = 16 * 16;

/// Scores and labels for one 16x16 image. Every other instance snaps scores
/// to a coarse grid so ties are common.
fn instance(seed: u64) -> (Vec<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prevalence = rng.random_range(0.02..0.6);
    let truth: Vec<bool> = (0..PIXELS).map(|_| rng.random_bool(prevalence)).collect();
    let coarse = seed % 2 == 0;
    let scores = truth
        .iter()
        .map(|&t| {
            let s: f64 = (rng.random::<f64>() + if t { 0.4 } else { 0.0 }).min(1.0);
            if coarse {
                (s * 16.0).round() / 16.0
            } else {
                s
            }
        })
        .collect();
    (scores, truth)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

#[test]
fn confusion_and_ratios_match_counting() {
    for seed in 0..INSTANCES {
        let (scores, truth) = instance(seed);
        let pred = binarize(&scores, 0.5);
        let c = confusion(&pred, &truth, None).unwrap();
        let (tp, tn, fp, fn_) = confusion_loop(&pred, &truth);
        assert_eq!((c.tp, c.tn, c.fp, c.fn_), (tp, tn, fp, fn_), "seed {seed}");
        assert_eq!(c.total(), PIXELS as u64);

        let m = metrics_from_counts(&c).unwrap();
        let (tp, tn, fp, fn_) = (tp as f64, tn as f64, fp as f64, fn_ as f64);
        assert!(close(m.accuracy, (tp + tn) / PIXELS as f64));
        let or_one = |num: f64, den: f64| if den == 0.0 { 1.0 } else { num / den };
        assert!(close(m.dice, or_one(2.0 * tp, 2.0 * tp + fp + fn_)), "seed {seed}");
        assert!(close(m.jaccard, or_one(tp, tp + fp + fn_)), "seed {seed}");
        assert!(close(m.sensitivity, or_one(tp, tp + fn_)), "seed {seed}");
        assert!(close(m.specificity, or_one(tn, tn + fp)), "seed {seed}");
    }
}

#[test]
fn fov_restriction_matches_filtered_counting() {
    for seed in 0..INSTANCES {
        let (scores, truth) = instance(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 10_000);
        let valid: Vec<bool> = (0..PIXELS).map(|_| rng.random_bool(0.7)).collect();
        let pred = binarize(&scores, 0.5);
        let keep = |v: &[bool]| -> Vec<bool> { v.iter().zip(&valid).filter(|(_, &k)| k).map(|(&x, _)| x).collect() };
        let c = confusion(&pred, &truth, Some(&valid)).unwrap();
        let (tp, tn, fp, fn_) = confusion_loop(&keep(&pred), &keep(&truth));
        assert_eq!((c.tp, c.tn, c.fp, c.fn_), (tp, tn, fp, fn_));
    }
}

#[test]
fn auc_equals_pairwise_ranking_probability() {
    let mut compared = 0;
    for seed in 0..INSTANCES {
        let (scores, truth) = instance(seed);
        let got = roc_auc(&scores, &truth, None).unwrap().auc;
        let want = pairwise_auc(&scores, &truth);
        match (got, want) {
            (Some(g), Some(w)) => {
                assert!(close(g, w), "seed {seed}: {g} vs {w}");
                compared += 1;
            }
            (None, None) => {}
            other => panic!("seed {seed}: {other:?}"),
        }
    }
    assert!(compared > 190);
}

#[test]
fn roc_curve_is_monotone_and_anchored() {
    for seed in 0..INSTANCES {
        let (scores, truth) = instance(seed);
        let curve = roc_auc(&scores, &truth, None).unwrap().curve;
        let (first, last) = (curve.points[0], *curve.points.last().unwrap());
        assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        if truth.iter().any(|&t| t) && truth.iter().any(|&t| !t) {
            assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        }
        for w in curve.points.windows(2) {
            assert!(w[1].threshold < w[0].threshold);
            assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
        }
    }
}

#[test]
fn f1_threshold_equals_exhaustive_sweep() {
    for seed in 0..INSTANCES {
        let images: Vec<(Vec<f64>, Vec<bool>)> = (0..1 + seed % 3).map(|k| instance(seed * 7 + k)).collect();
        let refs: Vec<(&[f64], &[bool])> = images.iter().map(|(s, t)| (s.as_slice(), t.as_slice())).collect();
        if !refs.iter().any(|(_, t)| t.iter().any(|&v| v)) {
            continue;
        }
        assert_eq!(f1_threshold(&refs).unwrap(), f1_threshold_sweep(&refs), "seed {seed}");
    }
}

#[test]
fn averaging_is_plain_mean_of_each_field() {
    let reports: Vec<MetricReport> = (0..INSTANCES)
        .map(|seed| {
            let (scores, truth) = instance(seed);
            let mut r = metrics_from_counts(&confusion(&binarize(&scores, 0.5), &truth, None).unwrap()).unwrap();
            r.auc = roc_auc(&scores, &truth, None).unwrap().auc;
            r
        })
        .collect();
    let m = MetricReport::mean(&reports).unwrap();
    let n = reports.len() as f64;
    assert!((m.dice - reports.iter().map(|r| r.dice).sum::<f64>() / n).abs() < 1e-12);
    assert!((m.specificity - reports.iter().map(|r| r.specificity).sum::<f64>() / n).abs() < 1e-12);
    let aucs: Vec<f64> = reports.iter().filter_map(|r| r.auc).collect();
    assert!((m.auc.unwrap() - aucs.iter().sum::<f64>() / aucs.len() as f64).abs() < 1e-12);
}

#[test]
fn one_vs_rest_class_metrics_match_counting() {
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<u8> = (0..PIXELS).map(|_| rng.random_range(0..3)).collect();
        // mostly right, with some random mistakes
        let pred: Vec<u8> = truth
            .iter()
            .map(|&t| if rng.random_bool(0.3) { rng.random_range(0..3) } else { t })
            .collect();
        let r = multiclass_report(&pred, &truth).unwrap();
        for (class, rep) in [(0u8, &r.background), (1, &r.artery), (2, &r.vein)] {
            let p: Vec<bool> = pred.iter().map(|&c| c == class).collect();
            let t: Vec<bool> = truth.iter().map(|&c| c == class).collect();
            let (tp, tn, fp, fn_) = confusion_loop(&p, &t);
            let want = metrics_from_counts(&ConfusionCounts { tp, tn, fp, fn_ }).unwrap();
            assert!(close(rep.dice, want.dice) && close(rep.sensitivity, want.sensitivity));
        }
        assert!(close(r.mean_without_background.dice, (r.artery.dice + r.vein.dice) / 2.0));
        assert!(close(
            r.mean_with_background.jaccard,
            (r.background.jaccard + r.artery.jaccard + r.vein.jaccard) / 3.0
        ));
    }
}
