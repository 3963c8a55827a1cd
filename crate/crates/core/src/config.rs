//! Architectural hyperparameters and ablation toggles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Convolution layout inside the spatial feature refinement block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SfrbConv {
    /// Depthwise first conv, grouped second conv (one group per output
    /// channel over its interleaved avg/max pair), per-channel attention.
    #[default]
    Depthwise,
    /// Dense 3x3 convolutions and a dense 1x1 attention map.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub input_height: usize,
    pub input_width: usize,
    pub input_channels: usize,
    pub base_channels: usize,
    /// Stem width followed by the widths of the two encoder stages.
    pub stage_channels: Vec<usize>,
    pub focal_levels: usize,
    pub focal_kernel_sizes: Vec<usize>,
    pub dropout_rate: f64,
    pub num_classes: usize,
    pub head_relu_enabled: bool,
    pub enable_sfrb_skip: bool,
    pub enable_sfrb_bottleneck: bool,
    pub enable_fmam_bottleneck: bool,
    pub enable_sfrb_decoder: bool,
    /// FMAM on every skip connection before it enters the decoder.
    pub enable_fmam_skip: bool,
    /// Parallel 1x1 and 3x3 branches in the encoder. When off each block is
    /// a single 3x3 convolution of the same total width.
    pub multiscale_encoder: bool,
    pub sfrb_conv: SfrbConv,
    pub bn_epsilon: f64,
    pub bn_momentum: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_height: 512,
            input_width: 512,
            input_channels: 3,
            base_channels: 24,
            stage_channels: vec![24, 48, 96],
            focal_levels: 3,
            focal_kernel_sizes: vec![3, 5, 7],
            dropout_rate: 0.5,
            num_classes: 1,
            head_relu_enabled: true,
            enable_sfrb_skip: true,
            enable_sfrb_bottleneck: true,
            enable_fmam_bottleneck: true,
            enable_sfrb_decoder: true,
            enable_fmam_skip: false,
            multiscale_encoder: true,
            sfrb_conv: SfrbConv::Depthwise,
            bn_epsilon: 1e-5,
            bn_momentum: 0.9,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn with_resolution(mut self, height: usize, width: usize) -> Self {
        self.input_height = height;
        self.input_width = width;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.input_height == 0 || self.input_width == 0 {
            return fail("input dimensions must be positive".into());
        }
        if self.input_height % 8 != 0 || self.input_width % 8 != 0 {
            return fail(format!(
                "input {}x{} is not divisible by 8",
                self.input_height, self.input_width
            ));
        }
        if self.input_channels == 0 {
            return fail("input_channels must be positive".into());
        }
        if self.stage_channels.len() != 3 {
            return fail(format!(
                "stage_channels needs 3 entries, got {}",
                self.stage_channels.len()
            ));
        }
        // each encoder tap carries twice its stage width, and the decoder
        // stage above it must produce that many channels
        if self.stage_channels[0] == 0 || self.stage_channels.windows(2).any(|w| w[1] != 2 * w[0]) {
            return fail(format!("stage_channels {:?} must double from stage to stage", self.stage_channels));
        }
        if self.stage_channels[0] != self.base_channels {
            return fail(format!(
                "stage_channels[0] = {} differs from base_channels = {}",
                self.stage_channels[0], self.base_channels
            ));
        }
        if self.focal_levels == 0 {
            return fail("focal_levels must be at least 1".into());
        }
        if self.focal_kernel_sizes.len() != self.focal_levels {
            return fail(format!(
                "{} focal kernel sizes for {} levels",
                self.focal_kernel_sizes.len(),
                self.focal_levels
            ));
        }
        if let Some(k) = self.focal_kernel_sizes.iter().find(|&&k| k < 3 || k % 2 == 0) {
            return fail(format!("focal kernel size {k} must be odd and at least 3"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        if self.num_classes == 0 {
            return fail("num_classes must be at least 1".into());
        }
        if !(self.bn_epsilon > 0.0) || !(0.0..1.0).contains(&self.bn_momentum) {
            return fail("bn_epsilon must be positive and bn_momentum in [0, 1)".into());
        }
        Ok(())
    }

    pub fn input_spec(&self) -> FeatureMapSpec {
        FeatureMapSpec::new(self.input_height, self.input_width, self.input_channels)
    }

    /// Channels of the deepest encoder tap.
    pub fn bottleneck_channels(&self) -> usize {
        2 * self.stage_channels[2]
    }
}

/// Spatial size and depth of one feature map, batch excluded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureMapSpec {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl FeatureMapSpec {
    pub const fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
        }
    }

    /// Feature-map description of an NCHW shape.
    pub fn of(shape: &[usize]) -> Result<Self> {
        match *shape {
            [_, c, h, w] => Ok(Self::new(h, w, c)),
            _ => Err(Error::Shape(format!("expected an NCHW map, got {shape:?}"))),
        }
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn numel(&self) -> usize {
        self.pixels() * self.channels
    }
}

impl std::fmt::Display for FeatureMapSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.height, self.width, self.channels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ModelConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_each_invariant() {
        let bad = [
            ModelConfig::default().with_resolution(500, 512),
            ModelConfig {
                stage_channels: vec![24, 24, 96],
                ..Default::default()
            },
            ModelConfig {
                stage_channels: vec![24, 48, 72],
                ..Default::default()
            },
            ModelConfig {
                base_channels: 16,
                ..Default::default()
            },
            ModelConfig {
                focal_kernel_sizes: vec![3, 4, 7],
                ..Default::default()
            },
            ModelConfig {
                focal_levels: 2,
                ..Default::default()
            },
            ModelConfig {
                focal_levels: 0,
                focal_kernel_sizes: vec![],
                ..Default::default()
            },
            ModelConfig {
                num_classes: 0,
                ..Default::default()
            },
            ModelConfig {
                dropout_rate: 1.0,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let cfg = ModelConfig {
            num_classes: 3,
            sfrb_conv: SfrbConv::Full,
            ..Default::default()
        };
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(toml::from_str::<ModelConfig>(&text).unwrap(), cfg);
        let partial: ModelConfig = toml::from_str("input_height = 256\ninput_width = 256").unwrap();
        assert_eq!(partial.input_height, 256);
        assert_eq!(partial.base_channels, 24);
        assert!(toml::from_str::<ModelConfig>("no_such_field = 1").is_err());
    }
}
