use lvsnet_tensor::{Float, Var};

use super::layers::{BatchNorm, Conv, ForwardCtx, ParamBuilder};
use crate::config::{FeatureMapSpec, ModelConfig};
use crate::error::{Error, Result};

fn pool_checked<T: Float>(x: &Var<T>, what: &str) -> Result<Var<T>> {
    let s = FeatureMapSpec::of(x.shape())?;
    if s.height % 2 != 0 || s.width % 2 != 0 {
        return Err(Error::Structural(format!("{what}: cannot 2x2-pool odd map {s}")));
    }
    Ok(x.max_pool_2x2()?)
}

/// First block: the pointwise skip branch and the full-resolution feature
/// map, followed by the normalize-and-pool step that yields the second skip.
#[derive(Clone, Debug)]
pub struct Stem {
    pub conv1x1: Conv,
    pub conv3x3: Conv,
    pub bn: BatchNorm,
    input: FeatureMapSpec,
    multiscale: bool,
}

impl Stem {
    pub fn new<T: Float>(pb: &mut ParamBuilder<T>, cfg: &ModelConfig) -> Result<Self> {
        let (cin, c) = (cfg.input_channels, cfg.base_channels);
        let wide = if cfg.multiscale_encoder { c } else { 2 * c };
        Ok(Self {
            conv1x1: Conv::new(pb, "stem.conv1x1", cin, c, 1, 1, true)?,
            conv3x3: Conv::new(pb, "stem.conv3x3", cin, wide, 3, 1, true)?,
            bn: BatchNorm::new(pb, "stem.bn", 2 * c)?,
            input: cfg.input_spec(),
            multiscale: cfg.multiscale_encoder,
        })
    }

    /// Returns `(s1, f1)`. Both branches read the raw image.
    pub fn forward<T: Float>(&self, ctx: &mut ForwardCtx<T>, img: &Var<T>) -> Result<(Var<T>, Var<T>)> {
        let got = FeatureMapSpec::of(img.shape())?;
        if got != self.input {
            return Err(Error::Shape(format!("stem expects {} input, got {got}", self.input)));
        }
        let s1 = self.conv1x1.forward(ctx, img)?.relu();
        let wide = self.conv3x3.forward(ctx, img)?.relu();
        let f1 = if self.multiscale {
            Var::concat_channels(&[&wide, &s1])?
        } else {
            wide
        };
        Ok((s1, f1))
    }

    /// `s2 = maxpool(bn(f1))`.
    pub fn downsample<T: Float>(&self, ctx: &mut ForwardCtx<T>, f1: &Var<T>) -> Result<Var<T>> {
        let normed = self.bn.forward(ctx, f1)?;
        pool_checked(&normed, "stem")
    }
}

/// Multi-scale block: parallel 1x1 and 3x3 branches of `c` channels each,
/// concatenated, then batch norm, 2x2 max pool and optional dropout.
#[derive(Clone, Debug)]
pub struct EncoderStage {
    pub conv1x1: Option<Conv>,
    pub conv3x3: Conv,
    pub bn: BatchNorm,
    pub dropout_rate: Option<f64>,
    name: String,
}

impl EncoderStage {
    pub fn new<T: Float>(
        pb: &mut ParamBuilder<T>,
        name: &str,
        cin: usize,
        c: usize,
        apply_dropout: bool,
        cfg: &ModelConfig,
    ) -> Result<Self> {
        let (conv1x1, conv3x3) = if cfg.multiscale_encoder {
            (
                Some(Conv::new(pb, &format!("{name}.conv1x1"), cin, c, 1, 1, true)?),
                Conv::new(pb, &format!("{name}.conv3x3"), cin, c, 3, 1, true)?,
            )
        } else {
            (None, Conv::new(pb, &format!("{name}.conv3x3"), cin, 2 * c, 3, 1, true)?)
        };
        Ok(Self {
            conv1x1,
            conv3x3,
            bn: BatchNorm::new(pb, &format!("{name}.bn"), 2 * c)?,
            dropout_rate: apply_dropout.then_some(cfg.dropout_rate),
            name: name.to_string(),
        })
    }

    /// Returns `(f, next_skip)`.
    pub fn forward<T: Float>(&self, ctx: &mut ForwardCtx<T>, x: &Var<T>) -> Result<(Var<T>, Var<T>)> {
        let wide = self.conv3x3.forward(ctx, x)?.relu();
        let f = match &self.conv1x1 {
            Some(point) => Var::concat_channels(&[&point.forward(ctx, x)?.relu(), &wide])?,
            None => wide,
        };
        let normed = self.bn.forward(ctx, &f)?;
        let mut next = pool_checked(&normed, &self.name)?;
        if let Some(rate) = self.dropout_rate {
            next = ctx.dropout(&next, rate)?;
        }
        Ok((f, next))
    }
}
