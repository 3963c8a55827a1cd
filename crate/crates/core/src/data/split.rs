use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::sample::SamplePair;
use crate::error::{Error, Result};

/// Divides a pool into training and validation sets by base image, so all
/// variants of one original land on the same side. The training side gets
/// `round(fraction * bases)` base images.
pub fn split(pool: &[SamplePair], fraction: f64, seed: u64) -> Result<(Vec<SamplePair>, Vec<SamplePair>)> {
    if pool.len() < 5 {
        return Err(Error::Config(format!("pool of {} is too small to split", pool.len())));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("split fraction {fraction} must lie in (0, 1)")));
    }
    let mut seen = HashSet::new();
    let mut bases: Vec<&str> = pool
        .iter()
        .map(|p| p.base_id.as_str())
        .filter(|b| seen.insert(*b))
        .collect();
    let n_train = (fraction * bases.len() as f64).round() as usize;
    if n_train == 0 || n_train >= bases.len() {
        return Err(Error::Config(format!(
            "{} base images cannot be split {fraction}/{} with both sides non-empty",
            bases.len(),
            1.0 - fraction
        )));
    }
    bases.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let train_bases: HashSet<&str> = bases[..n_train].iter().copied().collect();
    let (train, val) = pool
        .iter()
        .cloned()
        .partition(|p| train_bases.contains(p.base_id.as_str()));
    Ok((train, val))
}
