//! Trains a narrow network on a handful of small synthetic fundus images
//! and writes checkpoints and the run record to a temporary directory.

use lvsnet::data::{synth_fundus, DatasetKind, SamplePair};
use lvsnet::train::{train, Dataset, TrainConfig};
use lvsnet::ModelConfig;

const SIDE: u32 = 64;

fn synthetic(seeds: std::ops::Range<u64>) -> lvsnet::Result<Dataset> {
    let pairs = seeds
        .map(|s| {
            let f = synth_fundus(SIDE, SIDE, s);
            SamplePair::new(format!("{s:02}"), DatasetKind::Drive, f.image.clone(), f.binary_mask())
        })
        .collect::<lvsnet::Result<Vec<_>>>()?;
    Dataset::new(&pairs, (SIDE, SIDE), 1)
}

fn main() -> lvsnet::Result<()> {
    let (train_set, validation) = (synthetic(0..6)?, synthetic(6..8)?);
    let cfg = ModelConfig {
        base_channels: 8,
        stage_channels: vec![8, 16, 32],
        ..ModelConfig::default().with_resolution(SIDE as usize, SIDE as usize)
    };
    let tc = TrainConfig {
        epochs: 30,
        batch_size: 2,
        checkpoint_every: 10,
        ..TrainConfig::default()
    };
    let out_dir = std::env::temp_dir().join("lvsnet-train-tiny");
    let out = train(&cfg, &train_set, &validation, &tc, Some(&out_dir))?;
    for e in out.record.epochs.iter().step_by(5) {
        println!("epoch {:>3}  loss {:.4}  validation dice {:.4}", e.epoch, e.train_loss, e.validation_dice);
    }
    println!(
        "best validation dice {:.4} at epoch {}; outputs in {}",
        out.record.best_validation_dice,
        out.record.best_epoch,
        out_dir.display()
    );
    Ok(())
}
