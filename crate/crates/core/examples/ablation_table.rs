//! Trains the plain lightweight U-Net and the full network under the same
//! seed and data, and prints the comparison table.

use lvsnet::data::{synth_fundus, DatasetKind, SamplePair};
use lvsnet::train::{run_ablation, AblationRow, Dataset, TrainConfig};
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
    let rows: Vec<AblationRow> = match std::env::args().nth(1) {
        Some(arg) if arg == "all" => AblationRow::ALL.to_vec(),
        _ => vec![AblationRow::Lu, AblationRow::Full],
    };
    let cfg = ModelConfig {
        base_channels: 8,
        stage_channels: vec![8, 16, 32],
        ..ModelConfig::default().with_resolution(SIDE as usize, SIDE as usize)
    };
    let tc = TrainConfig { epochs: 40, batch_size: 2, ..TrainConfig::default() };
    let table = run_ablation(&rows, &cfg, &synthetic(0..6)?, &synthetic(6..8)?, &synthetic(20..23)?, &tc)?;
    for w in &table.warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", table.render());
    for r in &table.results {
        println!("{:?}: {} parameters", r.row, r.parameters);
    }
    Ok(())
}
