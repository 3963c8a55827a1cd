use serde::{Deserialize, Serialize};

use super::augment::{augment, AugmentationPlan};
use super::manifest::{DatasetManifest, SplitTag};
use super::rite::RiteColorTable;
use super::sample::{load_pair, resize_pair, SamplePair};
use super::split::split;
use crate::error::{Error, Result};

/// Data-side settings of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub rotation_step_degrees: f64,
    pub rotations_per_image: usize,
    pub contrast_factors: Vec<f64>,
    pub pool_size: usize,
    /// Share of base images used for training; the rest validates.
    pub train_fraction: f64,
    /// Share of base images held out for testing on datasets without an
    /// official test split.
    pub test_fraction: f64,
    /// Use only the first `limit` training images.
    pub limit: Option<usize>,
    /// Validate on the training pool itself instead of holding images out.
    /// Meant for overfitting checks on a handful of images.
    pub validate_on_train: bool,
    pub crossing_class: u8,
    pub uncertain_class: u8,
}

impl Default for DataConfig {
    fn default() -> Self {
        let plan = AugmentationPlan::default();
        Self {
            rotation_step_degrees: plan.rotation_step_degrees,
            rotations_per_image: plan.rotations_per_image,
            contrast_factors: plan.contrast_factors,
            pool_size: plan.target_pool_size,
            train_fraction: 0.8,
            test_fraction: 0.2,
            limit: None,
            validate_on_train: false,
            crossing_class: 1,
            uncertain_class: 0,
        }
    }
}

impl DataConfig {
    pub fn plan(&self) -> AugmentationPlan {
        AugmentationPlan {
            rotation_step_degrees: self.rotation_step_degrees,
            rotations_per_image: self.rotations_per_image,
            contrast_factors: self.contrast_factors.clone(),
            target_pool_size: self.pool_size,
        }
    }

    pub fn rite_colors(&self) -> RiteColorTable {
        RiteColorTable::new(self.crossing_class, self.uncertain_class)
    }
}

#[derive(Clone, Debug)]
pub struct PreparedSplits {
    pub train: Vec<SamplePair>,
    pub validation: Vec<SamplePair>,
    pub test: Vec<SamplePair>,
}

fn load_all<'a>(entries: impl Iterator<Item = &'a super::ManifestEntry>, size: (u32, u32), colors: &RiteColorTable) -> Result<Vec<SamplePair>> {
    entries.map(|e| Ok(resize_pair(&load_pair(e, colors)?, size))).collect()
}

/// Base images before augmentation: `(training bases, test images)`, both
/// resampled to `size` (`(height, width)`). Datasets without an official
/// split lose `test_fraction` of their images to a seed-fixed test set.
pub fn base_splits(manifest: &DatasetManifest, dc: &DataConfig, size: (u32, u32), seed: u64) -> Result<(Vec<SamplePair>, Vec<SamplePair>)> {
    let colors = dc.rite_colors();
    let (mut train, test) = if manifest.split(SplitTag::Test).next().is_some() {
        (
            load_all(manifest.split(SplitTag::Train), size, &colors)?,
            load_all(manifest.split(SplitTag::Test), size, &colors)?,
        )
    } else {
        let all = load_all(manifest.entries.iter(), size, &colors)?;
        split(&all, 1.0 - dc.test_fraction, seed ^ 0x7E57)?
    };
    if let Some(n) = dc.limit {
        if n == 0 {
            return Err(Error::Config("limit must be at least 1".into()));
        }
        train.truncate(n);
    }
    Ok((train, test))
}

/// Training pool (augmented), validation set and test set for one run.
pub fn prepare_splits(manifest: &DatasetManifest, dc: &DataConfig, size: (u32, u32), seed: u64) -> Result<PreparedSplits> {
    let (bases, test) = base_splits(manifest, dc, size, seed)?;
    let pool = augment(&bases, &dc.plan(), seed)?;
    let (train, validation) = if dc.validate_on_train {
        (pool.clone(), pool)
    } else {
        split(&pool, dc.train_fraction, seed)?
    };
    Ok(PreparedSplits { train, validation, test })
}
