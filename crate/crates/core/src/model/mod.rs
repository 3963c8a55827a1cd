//! The segmentation network, its blocks and the structural auditor.
//!
//! Every block is a plain struct of parameter handles into a shared
//! [`ParamStore`]; `forward` methods take a [`ForwardCtx`] carrying the store,
//! train/eval mode and the dropout stream. Maps are NCHW.

mod audit;
mod checkpoint;
mod decoder;
mod encoder;
mod fmam;
mod layers;
mod sfrb;

pub use audit::{audit_complexity, ComplexityAudit, LayerCost, LayerKind};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use decoder::{Bottleneck, DecoderStage, Head};
pub use encoder::{EncoderStage, Stem};
pub use fmam::Fmam;
pub use layers::{apply_bn_updates, BatchNorm, BnUpdate, Conv, ForwardCtx, Mode, ParamBuilder, UpConv};
pub use sfrb::Sfrb;

use lvsnet_tensor::{Float, ParamStore, Tensor, Var};

use crate::config::ModelConfig;
use crate::error::Result;

/// The four skip-connection sources.
#[derive(Clone, Debug)]
pub struct EncoderTaps<T: Float> {
    pub s1: Var<T>,
    pub s2: Var<T>,
    pub s3: Var<T>,
    pub s4: Var<T>,
}

/// Every named intermediate of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace<T: Float> {
    pub taps: EncoderTaps<T>,
    pub f1: Var<T>,
    pub f2: Var<T>,
    pub f3: Var<T>,
    pub d1: Var<T>,
    pub d2: Var<T>,
    pub d3: Var<T>,
    pub d4: Var<T>,
    pub output: Var<T>,
}

#[derive(Clone, Debug)]
pub struct LvsNet<T: Float> {
    cfg: ModelConfig,
    pub store: ParamStore<T>,
    pub stem: Stem,
    pub enc2: EncoderStage,
    pub enc3: EncoderStage,
    pub bottleneck: Bottleneck,
    pub dec2: DecoderStage,
    pub dec3: DecoderStage,
    pub dec4: DecoderStage,
    pub head: Head,
}

impl<T: Float> LvsNet<T> {
    /// Builds the network with freshly initialized weights drawn from
    /// `cfg.seed`.
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut pb = ParamBuilder::new(cfg.seed);
        let [c0, c1, c2] = [cfg.stage_channels[0], cfg.stage_channels[1], cfg.stage_channels[2]];
        let stem = Stem::new(&mut pb, cfg)?;
        let enc2 = EncoderStage::new(&mut pb, "enc2", 2 * c0, c1, false, cfg)?;
        let enc3 = EncoderStage::new(&mut pb, "enc3", 2 * c1, c2, true, cfg)?;
        let bottleneck = Bottleneck::new(&mut pb, cfg)?;
        let d1 = 2 * cfg.bottleneck_channels();
        let dec2 = DecoderStage::new(&mut pb, "d2", d1, c2, cfg)?;
        let dec3 = DecoderStage::new(&mut pb, "d3", 2 * c2, c1, cfg)?;
        let dec4 = DecoderStage::new(&mut pb, "d4", 2 * c1, c0, cfg)?;
        let head = Head::new(&mut pb, 2 * c0, cfg)?;
        Ok(Self {
            cfg: cfg.clone(),
            store: pb.finish(),
            stem,
            enc2,
            enc3,
            bottleneck,
            dec2,
            dec3,
            dec4,
            head,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    /// A forward context over this network's weights.
    pub fn ctx(&self, mode: Mode, track: bool, seed: u64) -> ForwardCtx<'_, T> {
        ForwardCtx::new(&self.store, mode, track, seed).with_bn_epsilon(self.cfg.bn_epsilon)
    }

    pub fn forward_trace(&self, ctx: &mut ForwardCtx<T>, img: &Var<T>) -> Result<ForwardTrace<T>> {
        let (s1, f1) = self.stem.forward(ctx, img)?;
        let s2 = self.stem.downsample(ctx, &f1)?;
        let (f2, s3) = self.enc2.forward(ctx, &s2)?;
        let (f3, s4) = self.enc3.forward(ctx, &s3)?;
        let d1 = self.bottleneck.forward(ctx, &s4)?;
        let d2 = self.dec2.forward(ctx, &d1, &s3)?;
        let d3 = self.dec3.forward(ctx, &d2, &s2)?;
        let d4 = self.dec4.forward(ctx, &d3, &s1)?;
        let output = self.head.forward(ctx, &d4)?;
        Ok(ForwardTrace {
            taps: EncoderTaps { s1, s2, s3, s4 },
            f1,
            f2,
            f3,
            d1,
            d2,
            d3,
            d4,
            output,
        })
    }

    /// Probability maps `[n, num_classes, H, W]`.
    pub fn forward(&self, ctx: &mut ForwardCtx<T>, img: &Var<T>) -> Result<Var<T>> {
        let (s1, f1) = self.stem.forward(ctx, img)?;
        let s2 = self.stem.downsample(ctx, &f1)?;
        drop(f1);
        let (_, s3) = self.enc2.forward(ctx, &s2)?;
        let (_, s4) = self.enc3.forward(ctx, &s3)?;
        let d = self.bottleneck.forward(ctx, &s4)?;
        let d = self.dec2.forward(ctx, &d, &s3)?;
        let d = self.dec3.forward(ctx, &d, &s2)?;
        let d = self.dec4.forward(ctx, &d, &s1)?;
        self.head.forward(ctx, &d)
    }

    /// Eval-mode inference without gradient tracking.
    pub fn predict(&self, img: &Tensor<T>) -> Result<Tensor<T>> {
        let mut ctx = self.ctx(Mode::Eval, false, 0);
        Ok(self.forward(&mut ctx, &Var::constant(img.clone()))?.value().clone())
    }

    /// The same network with weights converted to another float type.
    pub fn cast<U: Float>(&self) -> LvsNet<U> {
        LvsNet {
            cfg: self.cfg.clone(),
            store: self.store.cast(),
            stem: self.stem.clone(),
            enc2: self.enc2.clone(),
            enc3: self.enc3.clone(),
            bottleneck: self.bottleneck.clone(),
            dec2: self.dec2.clone(),
            dec3: self.dec3.clone(),
            dec4: self.dec4.clone(),
            head: self.head.clone(),
        }
    }
}
