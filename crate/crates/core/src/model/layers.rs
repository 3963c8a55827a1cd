use lvsnet_tensor::{
    Conv2dOptions, ConvTranspose2dOptions, Float, ParamId, ParamKind, ParamStore, Tensor, Var,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

/// Registers named parameters and draws their initial values.
///
/// Kernels and biases are uniform in `±1/sqrt(fan_in)`; batch-norm scale
/// starts at one, shift at zero, running variance at one.
pub struct ParamBuilder<T: Float> {
    store: ParamStore<T>,
    rng: ChaCha8Rng,
}

impl<T: Float> ParamBuilder<T> {
    pub fn new(seed: u64) -> Self {
        Self {
            store: ParamStore::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn uniform(&mut self, name: &str, shape: &[usize], fan_in: usize) -> Result<ParamId> {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let rng = &mut self.rng;
        let value = Tensor::from_fn(shape, |_| T::lit(rng.random_range(-bound..bound)));
        Ok(self.store.insert(name, ParamKind::Trainable, value)?)
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], v: f64, kind: ParamKind) -> Result<ParamId> {
        Ok(self.store.insert(name, kind, Tensor::full(shape, T::lit(v)))?)
    }

    pub fn finish(self) -> ParamStore<T> {
        self.store
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Batch statistics observed by one batch-norm layer during a training
/// forward pass.
#[derive(Clone, Debug)]
pub struct BnUpdate {
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// State threaded through one forward pass.
pub struct ForwardCtx<'a, T: Float> {
    pub store: &'a ParamStore<T>,
    pub mode: Mode,
    /// Whether trainable parameters become gradient-tracked leaves.
    pub track: bool,
    pub bn_epsilon: f64,
    rng: ChaCha8Rng,
    updates: Vec<BnUpdate>,
}

impl<'a, T: Float> ForwardCtx<'a, T> {
    pub fn new(store: &'a ParamStore<T>, mode: Mode, track: bool, seed: u64) -> Self {
        Self {
            store,
            mode,
            track,
            bn_epsilon: 1e-5,
            rng: ChaCha8Rng::seed_from_u64(seed),
            updates: Vec::new(),
        }
    }

    pub fn eval(store: &'a ParamStore<T>) -> Self {
        Self::new(store, Mode::Eval, false, 0)
    }

    pub fn with_bn_epsilon(mut self, eps: f64) -> Self {
        self.bn_epsilon = eps;
        self
    }

    pub fn param(&self, id: ParamId) -> Var<T> {
        self.store.var(id, self.track)
    }

    pub fn dropout(&mut self, x: &Var<T>, rate: f64) -> Result<Var<T>> {
        match self.mode {
            Mode::Train => Ok(x.dropout(rate, &mut self.rng)?),
            Mode::Eval => Ok(x.clone()),
        }
    }

    pub fn into_updates(self) -> Vec<BnUpdate> {
        self.updates
    }
}

/// Folds observed batch statistics into the running averages:
/// `running = momentum * running + (1 - momentum) * batch`.
pub fn apply_bn_updates<T: Float>(store: &mut ParamStore<T>, updates: &[BnUpdate], momentum: f64) {
    for u in updates {
        for (id, batch) in [(u.running_mean, &u.mean), (u.running_var, &u.var)] {
            for (r, &b) in store.value_mut(id).data_mut().iter_mut().zip(batch) {
                *r = T::lit(momentum * r.to_f64_lossy() + (1.0 - momentum) * b);
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Conv {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub opts: Conv2dOptions,
}

impl Conv {
    /// Same-padded, stride-1 convolution registered as `{name}.weight` and
    /// `{name}.bias`.
    pub fn new<T: Float>(
        pb: &mut ParamBuilder<T>,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
        groups: usize,
        bias: bool,
    ) -> Result<Self> {
        let fan_in = cin / groups * k * k;
        let weight = pb.uniform(&format!("{name}.weight"), &[cout, cin / groups, k, k], fan_in)?;
        let bias = if bias {
            Some(pb.uniform(&format!("{name}.bias"), &[cout], fan_in)?)
        } else {
            None
        };
        Ok(Self {
            weight,
            bias,
            opts: Conv2dOptions::same(k).with_groups(groups),
        })
    }

    pub fn forward<T: Float>(&self, ctx: &ForwardCtx<T>, x: &Var<T>) -> Result<Var<T>> {
        let w = ctx.param(self.weight);
        let b = self.bias.map(|b| ctx.param(b));
        Ok(x.conv2d(&w, b.as_ref(), self.opts)?)
    }
}

/// 3x3 transposed convolution that exactly doubles height and width.
#[derive(Clone, Debug)]
pub struct UpConv {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl UpConv {
    pub fn new<T: Float>(pb: &mut ParamBuilder<T>, name: &str, cin: usize, cout: usize) -> Result<Self> {
        let fan_in = cin * 9;
        Ok(Self {
            weight: pb.uniform(&format!("{name}.weight"), &[cin, cout, 3, 3], fan_in)?,
            bias: pb.uniform(&format!("{name}.bias"), &[cout], fan_in)?,
        })
    }

    pub fn forward<T: Float>(&self, ctx: &ForwardCtx<T>, x: &Var<T>) -> Result<Var<T>> {
        let (w, b) = (ctx.param(self.weight), ctx.param(self.bias));
        Ok(x.conv_transpose2d(&w, Some(&b), ConvTranspose2dOptions::double())?)
    }
}

#[derive(Clone, Debug)]
pub struct BatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
}

impl BatchNorm {
    pub fn new<T: Float>(pb: &mut ParamBuilder<T>, name: &str, c: usize) -> Result<Self> {
        Ok(Self {
            gamma: pb.constant(&format!("{name}.gamma"), &[c], 1.0, ParamKind::Trainable)?,
            beta: pb.constant(&format!("{name}.beta"), &[c], 0.0, ParamKind::Trainable)?,
            running_mean: pb.constant(&format!("{name}.running_mean"), &[c], 0.0, ParamKind::Buffer)?,
            running_var: pb.constant(&format!("{name}.running_var"), &[c], 1.0, ParamKind::Buffer)?,
        })
    }

    /// Batch statistics in training mode, running statistics in eval mode.
    pub fn forward<T: Float>(&self, ctx: &mut ForwardCtx<T>, x: &Var<T>) -> Result<Var<T>> {
        let (g, b) = (ctx.param(self.gamma), ctx.param(self.beta));
        let eps = T::lit(ctx.bn_epsilon);
        match ctx.mode {
            Mode::Eval => {
                let running = (
                    ctx.store.value(self.running_mean),
                    ctx.store.value(self.running_var),
                );
                Ok(x.batch_norm(&g, &b, Some(running), eps)?.0)
            }
            Mode::Train => {
                let (y, stats) = x.batch_norm(&g, &b, None, eps)?;
                if let Some((mean, var)) = stats {
                    ctx.updates.push(BnUpdate {
                        running_mean: self.running_mean,
                        running_var: self.running_var,
                        mean: mean.iter().map(|v| v.to_f64_lossy()).collect(),
                        var: var.iter().map(|v| v.to_f64_lossy()).collect(),
                    });
                }
                Ok(y)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pointwise_conv_parameter_count() {
        let mut pb = ParamBuilder::<f32>::new(0);
        Conv::new(&mut pb, "c", 3, 24, 1, 1, true).unwrap();
        assert_eq!(pb.finish().trainable_count(), 3 * 24 + 24);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let draw = |seed| {
            let mut pb = ParamBuilder::<f32>::new(seed);
            let id = pb.uniform("w", &[4, 9], 9).unwrap();
            pb.finish().value(id).clone()
        };
        assert_eq!(draw(5), draw(5));
        assert_ne!(draw(5), draw(6));
        assert!(draw(5).data().iter().all(|v| v.abs() <= 1.0 / 3.0));
    }

    #[test]
    fn running_statistics_follow_momentum() {
        let mut pb = ParamBuilder::<f64>::new(0);
        let bn = BatchNorm::new(&mut pb, "bn", 1).unwrap();
        let mut store = pb.finish();
        let x = Var::constant(Tensor::from_vec(&[2, 1, 1, 1], vec![1.0, 3.0]).unwrap());
        let mut ctx = ForwardCtx::new(&store, Mode::Train, false, 0);
        bn.forward(&mut ctx, &x).unwrap();
        let updates = ctx.into_updates();
        apply_bn_updates(&mut store, &updates, 0.9);
        assert!((store.value(bn.running_mean).data()[0] - 0.2).abs() < 1e-12);
        assert!((store.value(bn.running_var).data()[0] - 1.0).abs() < 1e-12);
    }
}
