//! Focal modulation: a depthwise context hierarchy, gated per level and
//! multiplied into a query projection.

use lvsnet_tensor::{Float, Var};

use super::layers::{Conv, ForwardCtx, ParamBuilder};
use crate::config::ModelConfig;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Fmam {
    pub query: Conv,
    pub context: Conv,
    /// One spatial gate per focal level plus one for the global level.
    pub gate: Conv,
    pub focal: Vec<Conv>,
    pub modulator: Conv,
    pub proj: Conv,
}

impl Fmam {
    pub fn new<T: Float>(pb: &mut ParamBuilder<T>, name: &str, c: usize, cfg: &ModelConfig) -> Result<Self> {
        if cfg.focal_levels == 0 || cfg.focal_kernel_sizes.len() != cfg.focal_levels {
            return Err(Error::Config(format!(
                "focal modulation needs one kernel size per level, got {} levels and {:?}",
                cfg.focal_levels, cfg.focal_kernel_sizes
            )));
        }
        let levels = cfg.focal_levels;
        let focal = cfg
            .focal_kernel_sizes
            .iter()
            .enumerate()
            .map(|(l, &k)| Conv::new(pb, &format!("{name}.focal{}", l + 1), c, c, k, c, false))
            .collect::<Result<_>>()?;
        Ok(Self {
            query: Conv::new(pb, &format!("{name}.query"), c, c, 1, 1, true)?,
            context: Conv::new(pb, &format!("{name}.context"), c, c, 1, 1, true)?,
            gate: Conv::new(pb, &format!("{name}.gate"), c, levels + 1, 1, 1, true)?,
            focal,
            modulator: Conv::new(pb, &format!("{name}.modulator"), c, c, 1, 1, true)?,
            proj: Conv::new(pb, &format!("{name}.proj"), c, c, 1, 1, true)?,
        })
    }

    pub fn forward<T: Float>(&self, ctx: &mut ForwardCtx<T>, x: &Var<T>) -> Result<Var<T>> {
        let q = self.query.forward(ctx, x)?;
        let gates = self.gate.forward(ctx, x)?;
        let mut z = self.context.forward(ctx, x)?;
        let mut aggregate: Option<Var<T>> = None;
        let mut accumulate = |term: Var<T>| -> Result<()> {
            aggregate = Some(match aggregate.take() {
                Some(acc) => acc.add(&term)?,
                None => term,
            });
            Ok(())
        };
        for (l, conv) in self.focal.iter().enumerate() {
            z = conv.forward(ctx, &z)?.gelu();
            accumulate(z.mul(&gates.narrow_channels(l, 1)?)?)?;
        }
        let global = z.global_avg_pool()?.gelu();
        let last = self.focal.len();
        accumulate(global.mul(&gates.narrow_channels(last, 1)?)?)?;
        let aggregate = aggregate.expect("at least one focal level");
        let modulated = q.mul(&self.modulator.forward(ctx, &aggregate)?)?;
        self.proj.forward(ctx, &modulated)
    }
}
