use std::path::{Path, PathBuf};
use std::time::Instant;

use lvsnet_tensor::{backward, Adam, Var};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::model::{apply_bn_updates, save_checkpoint, LvsNet, Mode};
use crate::objectives::{dice_loss_var, DiceLossParams};

use super::config::TrainConfig;
use super::dataset::Dataset;
use super::evaluate::validation_dice;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// Counted from 1.
    pub epoch: usize,
    /// Mean batch loss over the epoch.
    pub train_loss: f64,
    pub validation_dice: f64,
    /// Threshold fitted on the validation set, for binary data.
    pub threshold: Option<f64>,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_validation_dice: f64,
    pub best_checkpoint: Option<PathBuf>,
    pub stopped_early: bool,
}

impl RunRecord {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().find(|e| e.epoch == self.best_epoch)
    }
}

/// A finished run: its record, the weights of the best epoch and the weights
/// after the last epoch.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub record: RunRecord,
    pub best: LvsNet<f32>,
    pub last: LvsNet<f32>,
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    // splitmix-style scrambling so nearby (epoch, batch) pairs get unrelated streams
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_data(cfg: &ModelConfig, train: &Dataset, validation: &Dataset) -> Result<()> {
    for (name, d) in [("training", train), ("validation", validation)] {
        if d.is_empty() {
            return Err(Error::Dataset(format!("{name} split is empty")));
        }
        if d.classes() != cfg.num_classes {
            return Err(Error::Config(format!(
                "{name} data has {} classes, the model predicts {}",
                d.classes(),
                cfg.num_classes
            )));
        }
        let (h, w) = d.size();
        if (h as usize, w as usize) != (cfg.input_height, cfg.input_width) {
            return Err(Error::Shape(format!(
                "{name} data at {h}x{w}, model input {}x{}",
                cfg.input_height, cfg.input_width
            )));
        }
    }
    Ok(())
}

/// Trains a freshly initialized network. With `out_dir` set, checkpoints go
/// to `out_dir/checkpoints` and the run log to `out_dir/metrics/run.json`.
pub fn train(cfg: &ModelConfig, train_set: &Dataset, validation: &Dataset, tc: &TrainConfig, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    let cfg = match tc.ablation_row {
        Some(row) => row.apply(cfg)?,
        None => cfg.clone(),
    };
    train_from(LvsNet::new(&cfg)?, train_set, validation, tc, out_dir, &mut |_| {})
}

/// Continues training `net` (for example weights restored from a
/// checkpoint). Optimizer moments start from zero. `progress` sees each
/// epoch's record as soon as it is complete.
pub fn train_from(
    mut net: LvsNet<f32>,
    train_set: &Dataset,
    validation: &Dataset,
    tc: &TrainConfig,
    out_dir: Option<&Path>,
    progress: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    tc.validate()?;
    let cfg = net.config().clone();
    check_data(&cfg, train_set, validation)?;
    let params = DiceLossParams::uniform(cfg.num_classes);
    let mut adam = Adam::new(tc.learning_rate);
    adam.beta1 = tc.beta1;
    adam.beta2 = tc.beta2;

    let ckpt_dir = out_dir.map(|d| d.join("checkpoints"));
    let log_path = out_dir.map(|d| d.join("metrics").join("run.json"));
    let mut record = RunRecord {
        model_config: cfg.clone(),
        train_config: tc.clone(),
        epochs: Vec::new(),
        best_epoch: 0,
        best_validation_dice: f64::NEG_INFINITY,
        best_checkpoint: None,
        stopped_early: false,
    };
    let mut best = net.clone();
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=tc.epochs {
        let start = Instant::now();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(tc.seed, epoch as u64, 0)));
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for (b, chunk) in order.chunks(tc.batch_size).enumerate() {
            let (x, y) = train_set.batch(chunk)?;
            let mut ctx = net.ctx(Mode::Train, true, mix(tc.seed, epoch as u64, b as u64 + 1));
            let pred = net.forward(&mut ctx, &Var::constant(x))?;
            let loss = dice_loss_var(&pred, &y, &params)?;
            let updates = ctx.into_updates();
            let value = loss.value().data()[0] as f64;
            if !value.is_finite() {
                return Err(Error::Divergence(format!("loss became {value} at epoch {epoch}, batch {}", b + 1)));
            }
            let grads = backward(&loss)?;
            drop(loss);
            drop(pred);
            adam.step(&mut net.store, &grads);
            apply_bn_updates(&mut net.store, &updates, cfg.bn_momentum);
            loss_sum += value;
            batches += 1;
        }
        let (dice, threshold) = validation_dice(&net, validation, tc.eval_batch_size)?;
        record.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            validation_dice: dice,
            threshold,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
        progress(record.epochs.last().expect("just pushed"));
        if dice > record.best_validation_dice {
            record.best_validation_dice = dice;
            record.best_epoch = epoch;
            best = net.clone();
            if let Some(dir) = &ckpt_dir {
                let path = dir.join("best.safetensors");
                save_checkpoint(&best, &path)?;
                record.best_checkpoint = Some(path);
            }
        }
        if let Some(dir) = &ckpt_dir {
            if tc.checkpoint_every > 0 && epoch % tc.checkpoint_every == 0 {
                save_checkpoint(&net, dir.join(format!("epoch_{epoch:04}.safetensors")))?;
            }
        }
        if let Some(path) = &log_path {
            record.save(path)?;
        }
        if tc.early_stop_dice.is_some_and(|target| dice >= target) {
            record.stopped_early = true;
            break;
        }
    }
    if let Some(dir) = &ckpt_dir {
        save_checkpoint(&net, dir.join("last.safetensors"))?;
    }
    if let Some(path) = &log_path {
        record.save(path)?;
    }
    Ok(TrainOutcome { record, best, last: net })
}
