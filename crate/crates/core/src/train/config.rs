use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{Error, Result};

/// Optimization settings for one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Save a numbered checkpoint every this many epochs; 0 disables.
    pub checkpoint_every: usize,
    /// Architecture row applied on top of the model config, if any.
    pub ablation_row: Option<AblationRow>,
    /// Stop once validation dice reaches this value. Off by default.
    pub early_stop_dice: Option<f64>,
    /// Images per forward pass during validation and evaluation.
    pub eval_batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 8,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epochs: 100,
            seed: 0,
            checkpoint_every: 0,
            ablation_row: None,
            early_stop_dice: None,
            eval_batch_size: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.eval_batch_size == 0 {
            return Err(Error::Config("batch sizes must be at least 1".into()));
        }
        // zero is allowed so a run can be checked for weight stability
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!("learning_rate {} must be finite and >= 0", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Architecture variants compared in the ablation study, from the plain
/// lightweight U-Net up to the full model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AblationRow {
    Lu,
    Mlu,
    MluCbam,
    GSkip,
    GSkipGBottleneck,
    FSkip,
    FBottleneck,
    Full,
}

impl AblationRow {
    pub const ALL: [AblationRow; 8] = [
        Self::Lu,
        Self::Mlu,
        Self::MluCbam,
        Self::GSkip,
        Self::GSkipGBottleneck,
        Self::FSkip,
        Self::FBottleneck,
        Self::Full,
    ];

    /// Short label used on the command line and in files.
    pub fn key(self) -> &'static str {
        match self {
            Self::Lu => "lu",
            Self::Mlu => "mlu",
            Self::MluCbam => "mlu+cbam",
            Self::GSkip => "g-skip",
            Self::GSkipGBottleneck => "g-skip+g-bottleneck",
            Self::FSkip => "f-skip",
            Self::FBottleneck => "f-bottleneck",
            Self::Full => "full",
        }
    }

    /// Row title for the report table.
    pub fn title(self) -> &'static str {
        match self {
            Self::Lu => "Lightweight U-Net (LU)",
            Self::Mlu => "Multiscale LU (MLU)",
            Self::MluCbam => "MLU + CBAM in Skip Connections",
            Self::GSkip => "MLU + SFRB-Skip",
            Self::GSkipGBottleneck => "MLU + SFRB-Skip + SFRB-Bottleneck",
            Self::FSkip => "MLU + FMAM-Skip",
            Self::FBottleneck => "MLU + FMAM-Bottleneck",
            Self::Full => "MLU + SFRB-Skip + SFRB-Bottleneck + FMAM-Bottleneck",
        }
    }

    /// `base` with this row's block placements; all other fields kept.
    pub fn apply(self, base: &ModelConfig) -> Result<ModelConfig> {
        let mut c = base.clone();
        c.multiscale_encoder = self != Self::Lu;
        c.enable_sfrb_skip = matches!(self, Self::GSkip | Self::GSkipGBottleneck | Self::Full);
        c.enable_sfrb_bottleneck = matches!(self, Self::GSkipGBottleneck | Self::Full);
        c.enable_fmam_bottleneck = matches!(self, Self::FBottleneck | Self::Full);
        c.enable_fmam_skip = self == Self::FSkip;
        c.enable_sfrb_decoder = self == Self::Full;
        if self == Self::MluCbam {
            return Err(Error::Unsupported("the CBAM skip-connection variant is not implemented".into()));
        }
        Ok(c)
    }
}

impl fmt::Display for AblationRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for AblationRow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace([' ', '_'], "-");
        Self::ALL
            .into_iter()
            .find(|r| r.key() == norm)
            .ok_or_else(|| {
                let known: Vec<_> = Self::ALL.iter().map(|r| r.key()).collect();
                Error::Config(format!("unknown ablation row {s:?}; expected one of {}", known.join(", ")))
            })
    }
}

impl TryFrom<String> for AblationRow {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<AblationRow> for String {
    fn from(r: AblationRow) -> Self {
        r.key().to_string()
    }
}
