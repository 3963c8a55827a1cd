//! Spatial feature refinement: parallel average/max pooling of a refined
//! map, weighted by channel attention from the block input, plus a residual.

use lvsnet_tensor::{Float, Var};

use super::layers::{BatchNorm, Conv, ForwardCtx, ParamBuilder};
use crate::config::SfrbConv;
use crate::error::Result;

#[derive(Clone, Debug)]
pub struct Sfrb {
    pub conv1: Conv,
    pub bn1: BatchNorm,
    pub conv2: Conv,
    pub bn2: BatchNorm,
    pub attn: Conv,
    pub attn_bn: BatchNorm,
    kind: SfrbConv,
}

impl Sfrb {
    pub fn new<T: Float>(pb: &mut ParamBuilder<T>, name: &str, c: usize, kind: SfrbConv) -> Result<Self> {
        let n = |part: &str| format!("{name}.{part}");
        let (conv1, conv2, attn) = match kind {
            SfrbConv::Depthwise => (
                Conv::new(pb, &n("conv1"), c, c, 3, c, true)?,
                Conv::new(pb, &n("conv2"), 2 * c, c, 3, c, true)?,
                Conv::new(pb, &n("attn"), c, c, 1, c, true)?,
            ),
            SfrbConv::Full => (
                Conv::new(pb, &n("conv1"), c, c, 3, 1, true)?,
                Conv::new(pb, &n("conv2"), 2 * c, c, 3, 1, true)?,
                Conv::new(pb, &n("attn"), c, c, 1, 1, true)?,
            ),
        };
        Ok(Self {
            conv1,
            bn1: BatchNorm::new(pb, &n("bn1"), c)?,
            conv2,
            bn2: BatchNorm::new(pb, &n("bn2"), c)?,
            attn,
            attn_bn: BatchNorm::new(pb, &n("attn_bn"), c)?,
            kind,
        })
    }

    /// Channel attention coefficients, shape `[n, c, 1, 1]`, each in (0, 1).
    pub fn attention<T: Float>(&self, ctx: &mut ForwardCtx<T>, x: &Var<T>) -> Result<Var<T>> {
        let pooled = x.global_avg_pool()?;
        let a = self.attn.forward(ctx, &pooled)?;
        Ok(self.attn_bn.forward(ctx, &a)?.sigmoid())
    }

    pub fn forward<T: Float>(&self, ctx: &mut ForwardCtx<T>, x: &Var<T>) -> Result<Var<T>> {
        let i1 = self.conv1.forward(ctx, x)?;
        let i1 = self.bn1.forward(ctx, &i1)?.relu();
        let (avg, max) = (i1.avg_pool_3x3_same()?, i1.max_pool_3x3_same()?);
        // The grouped conv sees each channel's avg/max pair as one group.
        let pooled = match self.kind {
            SfrbConv::Depthwise => avg.interleave_channels(&max)?,
            SfrbConv::Full => Var::concat_channels(&[&avg, &max])?,
        };
        let i2 = self.conv2.forward(ctx, &pooled)?;
        let i2 = self.bn2.forward(ctx, &i2)?.relu();
        let a = self.attention(ctx, x)?;
        Ok(i2.mul(&a)?.add(x)?)
    }
}
