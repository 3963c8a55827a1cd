use std::collections::HashSet;

use image::{GrayImage, Luma, Rgb, RgbImage};
use lvsnet::data::{adjust_contrast, augment, rotate_pair, split, AugmentationPlan, DatasetKind, SamplePair};
use lvsnet::objectives::{
    binarize, confusion, dice_loss, f1_threshold, metrics_from_counts, roc_auc, DiceLossParams, THRESHOLD_GRID,
};
use lvsnet::report::{disambiguate_labels, render_overlay, OverlaySpec};
use lvsnet::tensor::Tensor;
use proptest::prelude::*;

fn pair_from(id: &str, w: u32, h: u32, pixels: &[(u8, bool)]) -> SamplePair {
    let image = RgbImage::from_fn(w, h, |x, y| {
        let v = pixels[((y * w + x) as usize) % pixels.len()].0;
        Rgb([v, v / 2, 255 - v])
    });
    let mask = GrayImage::from_fn(w, h, |x, y| Luma([pixels[((y * w + x) as usize) % pixels.len()].1 as u8]));
    SamplePair::new(id, DatasetKind::Drive, image, mask).unwrap()
}

fn scores_and_truth(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    prop::collection::vec((0.0f64..=1.0, any::<bool>()), n..=n).prop_map(|v| v.into_iter().unzip())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metrics_stay_in_unit_interval((scores, truth) in scores_and_truth(64), t in 0.0f64..=1.0) {
        let c = confusion(&binarize(&scores, t), &truth, None).unwrap();
        prop_assert_eq!(c.total(), 64);
        let m = metrics_from_counts(&c).unwrap();
        for v in [m.accuracy, m.dice, m.jaccard, m.sensitivity, m.specificity] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        // dice and jaccard are tied by D = 2J / (1 + J)
        prop_assert!((m.dice - 2.0 * m.jaccard / (1.0 + m.jaccard)).abs() < 1e-12);
    }

    #[test]
    fn auc_ignores_monotone_rescaling((scores, truth) in scores_and_truth(48)) {
        let a = roc_auc(&scores, &truth, None).unwrap().auc;
        let squared: Vec<f64> = scores.iter().map(|s| s * s).collect();
        let b = roc_auc(&squared, &truth, None).unwrap().auc;
        match (a, b) {
            (Some(a), Some(b)) => {
                prop_assert!((0.0..=1.0).contains(&a));
                prop_assert!((a - b).abs() < 1e-12);
            }
            (a, b) => prop_assert_eq!(a, b),
        }
    }

    #[test]
    fn fitted_threshold_lies_on_the_grid((scores, truth) in scores_and_truth(40)) {
        prop_assume!(truth.iter().any(|&t| t) && truth.iter().any(|&t| !t));
        let t = f1_threshold(&[(&scores, &truth)]).unwrap();
        let i = t * THRESHOLD_GRID as f64;
        prop_assert!(i.fract() == 0.0 && i >= 1.0 && i < THRESHOLD_GRID as f64);
    }

    #[test]
    fn dice_loss_is_bounded_and_vanishes_on_truth(
        pred in prop::collection::vec(0.0f64..=1.0, 32),
        truth in prop::collection::vec(any::<bool>(), 32),
    ) {
        let params = DiceLossParams::uniform(2);
        let g: Vec<f64> = truth.iter().map(|&t| t as u8 as f64).collect();
        let s = Tensor::from_vec(&[2, 2, 2, 4], pred).unwrap();
        let g = Tensor::from_vec(&[2, 2, 2, 4], g).unwrap();
        let loss = dice_loss(&s, &g, &params).unwrap();
        prop_assert!((0.0..=1.0).contains(&loss));
        let perfect = dice_loss(&g, &g, &params).unwrap();
        prop_assert!(perfect <= loss + 1e-12);
        prop_assert!(perfect < 1e-6 || truth.iter().all(|&t| !t) || truth.iter().all(|&t| t));
    }

    #[test]
    fn full_turns_are_identity(pixels in prop::collection::vec((any::<u8>(), any::<bool>()), 1..40), turns in -2i32..=2) {
        let p = pair_from("a", 9, 7, &pixels);
        prop_assert_eq!(rotate_pair(&p, 360.0 * turns as f64), p);
    }

    #[test]
    fn rotation_keeps_labels_binary(pixels in prop::collection::vec((any::<u8>(), any::<bool>()), 1..40), deg in 0.0f64..360.0) {
        let r = rotate_pair(&pair_from("a", 11, 11, &pixels), deg);
        prop_assert_eq!(r.image.dimensions(), (11, 11));
        prop_assert!(r.mask.pixels().all(|p| p.0[0] <= 1));
        prop_assert!(r.validate().is_ok());
    }

    #[test]
    fn contrast_preserves_pixel_order(pixels in prop::collection::vec((any::<u8>(), any::<bool>()), 2..40), f in 0.1f64..3.0) {
        let p = pair_from("a", 8, 5, &pixels);
        let out = adjust_contrast(&p.image, f);
        let (a, b) = (p.image.as_raw(), out.as_raw());
        for c in 0..3 {
            for i in (c..a.len()).step_by(3) {
                for j in (c..a.len()).step_by(3) {
                    if a[i] < a[j] {
                        prop_assert!(b[i] <= b[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn augmentation_hits_target_with_unique_ids(bases in 1usize..6, target_frac in 0.0f64..=1.0, seed in any::<u64>()) {
        let pairs: Vec<SamplePair> = (0..bases).map(|i| pair_from(&format!("b{i}"), 6, 6, &[(i as u8 * 40, i % 2 == 0)])).collect();
        let plan = AugmentationPlan {
            rotation_step_degrees: 90.0,
            rotations_per_image: 4,
            contrast_factors: vec![0.8, 1.2],
            target_pool_size: 0,
        };
        let total = bases * plan.variants_per_image();
        let target = bases + ((total - bases) as f64 * target_frac) as usize;
        let pool = augment(&pairs, &AugmentationPlan { target_pool_size: target, ..plan }, seed).unwrap();
        prop_assert_eq!(pool.len(), target);
        let ids: HashSet<&str> = pool.iter().map(|p| p.id.as_str()).collect();
        prop_assert_eq!(ids.len(), target);
        let known: HashSet<String> = pairs.iter().map(|p| p.id.clone()).collect();
        prop_assert!(pool.iter().all(|p| known.contains(&p.base_id)));
    }

    #[test]
    fn split_partitions_by_base(bases in 5usize..30, per_base in 1usize..4, frac in 0.2f64..0.8, seed in any::<u64>()) {
        let pool: Vec<SamplePair> = (0..bases)
            .flat_map(|b| (0..per_base).map(move |k| {
                let mut p = pair_from(&format!("b{b}_{k}"), 2, 2, &[(0, false)]);
                p.base_id = format!("b{b}");
                p
            }))
            .collect();
        let n_train = (frac * bases as f64).round() as usize;
        prop_assume!(n_train > 0 && n_train < bases);
        let (train, val) = split(&pool, frac, seed).unwrap();
        prop_assert_eq!(train.len() + val.len(), pool.len());
        prop_assert_eq!(train.len(), n_train * per_base);
        let tb: HashSet<&str> = train.iter().map(|p| p.base_id.as_str()).collect();
        prop_assert!(val.iter().all(|p| !tb.contains(p.base_id.as_str())));
        let again = split(&pool, frac, seed).unwrap();
        prop_assert_eq!(again.0, train);
    }

    #[test]
    fn overlay_uses_one_of_four_colors(
        cells in prop::collection::vec((any::<bool>(), any::<bool>(), any::<u8>()), 48),
    ) {
        let (w, h) = (8, 6);
        let pred = GrayImage::from_fn(w, h, |x, y| Luma([cells[(y * w + x) as usize].0 as u8 * 255]));
        let truth = GrayImage::from_fn(w, h, |x, y| Luma([cells[(y * w + x) as usize].1 as u8]));
        let base = RgbImage::from_fn(w, h, |x, y| { let v = cells[(y * w + x) as usize].2; Rgb([v, v, v]) });
        let out = render_overlay(&pred, &truth, Some(&base), &OverlaySpec::default()).unwrap();
        let tp = cells.iter().filter(|c| c.0 && c.1).count();
        let green = out.pixels().filter(|p| p.0 == [0, 255, 0]).count();
        // a dimmed background pixel never reaches 255
        prop_assert_eq!(green, tp);
        for (i, p) in out.pixels().enumerate() {
            if !cells[i].0 && !cells[i].1 {
                prop_assert!(p.0.iter().all(|&v| v <= 127));
            }
        }
    }

    #[test]
    fn disambiguated_labels_are_unique(labels in prop::collection::vec("[ab]{1,2}(-[23])?", 1..12)) {
        let out = disambiguate_labels(labels.iter().map(String::as_str));
        prop_assert_eq!(out.len(), labels.len());
        let set: HashSet<&String> = out.iter().collect();
        prop_assert_eq!(set.len(), out.len());
        // the first occurrence of each label keeps its name
        let mut first = HashSet::new();
        for (l, o) in labels.iter().zip(&out) {
            if first.insert(l) {
                prop_assert_eq!(l, o);
            }
        }
    }
}
