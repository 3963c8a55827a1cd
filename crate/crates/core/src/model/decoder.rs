use lvsnet_tensor::{Float, Var};

use super::fmam::Fmam;
use super::layers::{Conv, ForwardCtx, ParamBuilder, UpConv};
use super::sfrb::Sfrb;
use crate::config::{FeatureMapSpec, ModelConfig};
use crate::error::{Error, Result};

/// `D1 = concat(SFRB(FMAM(s4)), s4)`; a disabled block is the identity.
#[derive(Clone, Debug)]
pub struct Bottleneck {
    pub fmam: Option<Fmam>,
    pub sfrb: Option<Sfrb>,
}

impl Bottleneck {
    pub fn new<T: Float>(pb: &mut ParamBuilder<T>, cfg: &ModelConfig) -> Result<Self> {
        let c = cfg.bottleneck_channels();
        Ok(Self {
            fmam: cfg
                .enable_fmam_bottleneck
                .then(|| Fmam::new(pb, "fmam", c, cfg))
                .transpose()?,
            sfrb: cfg
                .enable_sfrb_bottleneck
                .then(|| Sfrb::new(pb, "sfrb.bottleneck", c, cfg.sfrb_conv))
                .transpose()?,
        })
    }

    pub fn forward<T: Float>(&self, ctx: &mut ForwardCtx<T>, s4: &Var<T>) -> Result<Var<T>> {
        let mut refined = s4.clone();
        if let Some(f) = &self.fmam {
            refined = f.forward(ctx, &refined)?;
        }
        if let Some(g) = &self.sfrb {
            refined = g.forward(ctx, &refined)?;
        }
        Ok(Var::concat_channels(&[&refined, s4])?)
    }
}

/// Upsample-and-merge block:
/// `concat(SFRB(ReLU(TConv(d_prev))), SFRB(skip))`.
#[derive(Clone, Debug)]
pub struct DecoderStage {
    pub up: UpConv,
    pub sfrb_up: Option<Sfrb>,
    pub fmam_skip: Option<Fmam>,
    pub sfrb_skip: Option<Sfrb>,
    out_channels: usize,
}

impl DecoderStage {
    /// `tag` is the decoder output label (`d2`, `d3`, `d4`).
    pub fn new<T: Float>(
        pb: &mut ParamBuilder<T>,
        tag: &str,
        cin: usize,
        out_channels: usize,
        cfg: &ModelConfig,
    ) -> Result<Self> {
        let c = out_channels;
        Ok(Self {
            up: UpConv::new(pb, &format!("{tag}.up"), cin, c)?,
            sfrb_up: cfg
                .enable_sfrb_decoder
                .then(|| Sfrb::new(pb, &format!("sfrb.{tag}.up"), c, cfg.sfrb_conv))
                .transpose()?,
            fmam_skip: cfg
                .enable_fmam_skip
                .then(|| Fmam::new(pb, &format!("fmam.{tag}.skip"), c, cfg))
                .transpose()?,
            sfrb_skip: cfg
                .enable_sfrb_skip
                .then(|| Sfrb::new(pb, &format!("sfrb.{tag}.skip"), c, cfg.sfrb_conv))
                .transpose()?,
            out_channels,
        })
    }

    pub fn forward<T: Float>(&self, ctx: &mut ForwardCtx<T>, d_prev: &Var<T>, skip: &Var<T>) -> Result<Var<T>> {
        let below = FeatureMapSpec::of(d_prev.shape())?;
        let beside = FeatureMapSpec::of(skip.shape())?;
        let expected = FeatureMapSpec::new(2 * below.height, 2 * below.width, self.out_channels);
        if beside != expected {
            return Err(Error::Structural(format!(
                "decoder stage from {below} needs a {expected} skip, got {beside}"
            )));
        }
        let mut up = self.up.forward(ctx, d_prev)?.relu();
        if let Some(g) = &self.sfrb_up {
            up = g.forward(ctx, &up)?;
        }
        let mut side = skip.clone();
        if let Some(f) = &self.fmam_skip {
            side = f.forward(ctx, &side)?;
        }
        if let Some(g) = &self.sfrb_skip {
            side = g.forward(ctx, &side)?;
        }
        Ok(Var::concat_channels(&[&up, &side])?)
    }
}

/// Pointwise projection to class maps, then `sigmoid(ReLU(.))` or plain
/// sigmoid.
#[derive(Clone, Debug)]
pub struct Head {
    pub conv: Conv,
    pub relu: bool,
}

impl Head {
    pub fn new<T: Float>(pb: &mut ParamBuilder<T>, cin: usize, cfg: &ModelConfig) -> Result<Self> {
        Ok(Self {
            conv: Conv::new(pb, "head.conv1x1", cin, cfg.num_classes, 1, 1, true)?,
            relu: cfg.head_relu_enabled,
        })
    }

    pub fn forward<T: Float>(&self, ctx: &mut ForwardCtx<T>, d4: &Var<T>) -> Result<Var<T>> {
        let logits = self.conv.forward(ctx, d4)?;
        let logits = if self.relu { logits.relu() } else { logits };
        Ok(logits.sigmoid())
    }
}
