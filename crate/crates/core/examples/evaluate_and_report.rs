//! Trains briefly, then evaluates on held-out synthetic images with a
//! validation-fitted threshold, exports the ROC curve and writes overlays.

use lvsnet::data::{synth_fundus, DatasetKind, SamplePair};
use lvsnet::report::{export_roc, render_overlay, OverlaySpec};
use lvsnet::train::{evaluate, predict_scores, train, Dataset, ThresholdPolicy, TrainConfig};
use lvsnet::ModelConfig;

const SIDE: u32 = 64;

fn synthetic(seeds: std::ops::Range<u64>) -> Result<(Vec<SamplePair>, Dataset), Box<dyn std::error::Error>> {
    let mut pairs = Vec::new();
    for s in seeds {
        let f = synth_fundus(SIDE, SIDE, s);
        let mut p = SamplePair::new(format!("{s:02}"), DatasetKind::Drive, f.image.clone(), f.binary_mask())?;
        p.fov = Some(f.fov.clone());
        pairs.push(p);
    }
    let data = Dataset::new(&pairs, (SIDE, SIDE), 1)?;
    Ok((pairs, data))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (_, train_set) = synthetic(0..6)?;
    let (_, validation) = synthetic(6..8)?;
    let (test_pairs, test) = synthetic(20..24)?;
    let cfg = ModelConfig {
        base_channels: 8,
        stage_channels: vec![8, 16, 32],
        ..ModelConfig::default().with_resolution(SIDE as usize, SIDE as usize)
    };
    let tc = TrainConfig { epochs: 25, batch_size: 2, ..TrainConfig::default() };
    let net = train(&cfg, &train_set, &validation, &tc, None)?.best;

    let report = evaluate(&net, &test, ThresholdPolicy::F1(&validation), 2)?;
    println!("threshold {:.4}", report.threshold.unwrap_or(f64::NAN));
    for img in &report.per_image {
        let r = &img.report;
        println!("{}  dice {:.4}  sen {:.4}  sp {:.4}  acc {:.4}", img.id, r.dice, r.sensitivity, r.specificity, r.accuracy);
    }
    let a = &report.aggregate;
    println!("mean dice {:.4}, AUC {:.4}", a.dice, a.auc.unwrap_or(f64::NAN));

    let out = std::env::temp_dir().join("lvsnet-evaluate");
    if let Some(roc) = &report.roc {
        let files = export_roc(&[("tiny", &roc.curve)], out.join("roc"))?;
        println!("ROC curves exported for: {}", files.join(", "));
    }

    let t = report.threshold.unwrap_or(0.5);
    let scores = predict_scores(&net, &test, 2)?;
    for (pair, s) in test_pairs.iter().zip(&scores) {
        let pred = image::GrayImage::from_fn(SIDE, SIDE, |x, y| {
            image::Luma([if s[(y * SIDE + x) as usize] >= t { 255 } else { 0 }])
        });
        let overlay = render_overlay(&pred, &pair.mask, Some(&pair.image), &OverlaySpec::default())?;
        overlay.save(out.join(format!("{}_overlay.png", pair.id)))?;
    }
    println!("overlays in {}", out.display());
    Ok(())
}
