//! Dataset discovery, decoding, augmentation and splitting.

mod augment;
mod manifest;
mod prepare;
mod rite;
mod sample;
mod split;
mod synth;

pub use augment::{adjust_contrast, augment, rotate_pair, AugmentationPlan};
pub use manifest::{discover, DatasetKind, DatasetManifest, ManifestEntry, SplitTag, STARE_IDS};
pub use prepare::{base_splits, prepare_splits, DataConfig, PreparedSplits};
pub use rite::{encode_rite_labels, RiteColorTable};
pub use sample::{image_tensor, load_and_resize, load_pair, mask_tensor, resize_pair, stack, SamplePair};
pub use split::split;
pub use synth::{synth_fundus, write_synthetic_dataset, SyntheticFundus};
