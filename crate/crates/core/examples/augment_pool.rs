//! Writes a synthetic DRIVE-layout dataset, builds the augmented pool and
//! the base-image split, and saves a few rotated samples to look at.

use std::collections::HashSet;

use lvsnet::data::{discover, prepare_splits, write_synthetic_dataset, DataConfig, DatasetKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("lvsnet-augment");
    write_synthetic_dataset(&dir, DatasetKind::Drive, Some((128, 128)), 0)?;
    let manifest = discover(&dir, DatasetKind::Drive)?;
    println!("found {} image/label pairs under {}", manifest.entries.len(), dir.display());

    let dc = DataConfig::default();
    let splits = prepare_splits(&manifest, &dc, (96, 96), 7)?;
    println!(
        "train {}, validation {}, test {}",
        splits.train.len(),
        splits.validation.len(),
        splits.test.len()
    );
    let bases = |v: &[lvsnet::data::SamplePair]| v.iter().map(|p| p.base_id.clone()).collect::<HashSet<_>>();
    let (tb, vb) = (bases(&splits.train), bases(&splits.validation));
    println!("{} training bases, {} validation bases, shared: {}", tb.len(), vb.len(), tb.intersection(&vb).count());

    let out = dir.join("samples");
    std::fs::create_dir_all(&out)?;
    for p in splits.train.iter().filter(|p| p.base_id == splits.train[0].base_id).take(6) {
        let path = out.join(format!("{}.png", p.id));
        p.image.save(&path)?;
    }
    println!("samples written to {}", out.display());
    Ok(())
}
