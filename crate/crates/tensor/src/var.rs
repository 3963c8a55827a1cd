//! Reverse-mode automatic differentiation.
//!
//! A [`Var`] is a reference-counted node holding its forward value and,
//! when any input requires a gradient, the operation that produced it. Nodes
//! built purely from constants record nothing, so inference without
//! gradients frees intermediates as soon as they go out of scope.

use std::collections::{HashMap, HashSet};
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::error::{Result, TensorError};
use crate::float::Float;
use crate::kernels::{broadcast, conv, norm, pool};
use crate::params::ParamId;
use crate::tensor::Tensor;

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

struct Node<T: Float> {
    id: u64,
    value: Tensor<T>,
    requires_grad: bool,
    param: Option<ParamId>,
    op: Op<T>,
}

enum Op<T: Float> {
    Leaf,
    Conv2d {
        x: Var<T>,
        w: Var<T>,
        b: Option<Var<T>>,
        opts: conv::Conv2dOptions,
    },
    ConvTranspose2d {
        x: Var<T>,
        w: Var<T>,
        b: Option<Var<T>>,
        opts: conv::ConvTranspose2dOptions,
    },
    BatchNorm {
        x: Var<T>,
        gamma: Var<T>,
        beta: Var<T>,
        state: norm::BatchNormState<T>,
    },
    Relu(Var<T>),
    Gelu(Var<T>),
    Sigmoid(Var<T>),
    ArgmaxPool {
        x: Var<T>,
        arg: Vec<u32>,
    },
    AvgPool3(Var<T>),
    GlobalAvgPool(Var<T>),
    Add(Var<T>, Var<T>),
    Mul(Var<T>, Var<T>),
    Concat(Vec<Var<T>>),
    Narrow {
        x: Var<T>,
        start: usize,
    },
    Interleave(Var<T>, Var<T>),
    Dropout {
        x: Var<T>,
        mask: Vec<T>,
    },
    Mean(Var<T>),
    External {
        x: Var<T>,
        grad: Tensor<T>,
    },
}

impl<T: Float> Op<T> {
    fn parents(&self) -> Vec<&Var<T>> {
        match self {
            Op::Leaf => vec![],
            Op::Conv2d { x, w, b, .. } | Op::ConvTranspose2d { x, w, b, .. } => {
                let mut v = vec![x, w];
                v.extend(b.as_ref());
                v
            }
            Op::BatchNorm { x, gamma, beta, .. } => vec![x, gamma, beta],
            Op::Relu(x)
            | Op::Gelu(x)
            | Op::Sigmoid(x)
            | Op::AvgPool3(x)
            | Op::GlobalAvgPool(x)
            | Op::Mean(x)
            | Op::ArgmaxPool { x, .. }
            | Op::Narrow { x, .. }
            | Op::Dropout { x, .. }
            | Op::External { x, .. } => vec![x],
            Op::Add(a, b) | Op::Mul(a, b) | Op::Interleave(a, b) => vec![a, b],
            Op::Concat(parts) => parts.iter().collect(),
        }
    }
}

/// A differentiable value.
pub struct Var<T: Float> {
    node: Rc<Node<T>>,
}

impl<T: Float> Clone for Var<T> {
    fn clone(&self) -> Self {
        Self {
            node: Rc::clone(&self.node),
        }
    }
}

impl<T: Float> std::fmt::Debug for Var<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var")
            .field("shape", &self.shape())
            .field("requires_grad", &self.requires_grad())
            .finish()
    }
}

fn gelu_cdf<T: Float>(x: T) -> T {
    T::lit(0.5) * (T::one() + (x * T::lit(std::f64::consts::FRAC_1_SQRT_2)).erf())
}

impl<T: Float> Var<T> {
    fn make(value: Tensor<T>, requires_grad: bool, param: Option<ParamId>, op: Op<T>) -> Self {
        Self {
            node: Rc::new(Node {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                value,
                requires_grad,
                param,
                op,
            }),
        }
    }

    fn derived(value: Tensor<T>, op: Op<T>) -> Self {
        if op.parents().iter().any(|p| p.requires_grad()) {
            Self::make(value, true, None, op)
        } else {
            Self::make(value, false, None, Op::Leaf)
        }
    }

    pub fn constant(value: Tensor<T>) -> Self {
        Self::make(value, false, None, Op::Leaf)
    }

    /// A leaf whose gradient is reported by [`backward`].
    pub fn input(value: Tensor<T>) -> Self {
        Self::make(value, true, None, Op::Leaf)
    }

    pub fn param(value: Tensor<T>, id: ParamId) -> Self {
        Self::make(value, true, Some(id), Op::Leaf)
    }

    pub fn value(&self) -> &Tensor<T> {
        &self.node.value
    }

    pub fn shape(&self) -> &[usize] {
        self.node.value.shape()
    }

    pub fn requires_grad(&self) -> bool {
        self.node.requires_grad
    }

    /// Same value, cut from the graph.
    pub fn detach(&self) -> Self {
        Self::constant(self.value().clone())
    }

    pub fn conv2d(&self, w: &Var<T>, b: Option<&Var<T>>, opts: conv::Conv2dOptions) -> Result<Self> {
        let y = conv::conv2d(self.value(), w.value(), b.map(|b| b.value()), opts)?;
        Ok(Self::derived(
            y,
            Op::Conv2d {
                x: self.clone(),
                w: w.clone(),
                b: b.cloned(),
                opts,
            },
        ))
    }

    pub fn conv_transpose2d(
        &self,
        w: &Var<T>,
        b: Option<&Var<T>>,
        opts: conv::ConvTranspose2dOptions,
    ) -> Result<Self> {
        let y = conv::conv_transpose2d(self.value(), w.value(), b.map(|b| b.value()), opts)?;
        Ok(Self::derived(
            y,
            Op::ConvTranspose2d {
                x: self.clone(),
                w: w.clone(),
                b: b.cloned(),
                opts,
            },
        ))
    }

    /// Batch normalization. With `running = None` the batch statistics are
    /// used and returned as `(mean, biased variance)` for the caller to fold
    /// into its running averages.
    pub fn batch_norm(
        &self,
        gamma: &Var<T>,
        beta: &Var<T>,
        running: Option<(&Tensor<T>, &Tensor<T>)>,
        eps: T,
    ) -> Result<(Self, Option<(Vec<T>, Vec<T>)>)> {
        let (y, state) = norm::batch_norm(self.value(), gamma.value(), beta.value(), running, eps)?;
        let stats = state.batch_mean.clone().zip(state.batch_var.clone());
        let out = Self::derived(
            y,
            Op::BatchNorm {
                x: self.clone(),
                gamma: gamma.clone(),
                beta: beta.clone(),
                state,
            },
        );
        Ok((out, stats))
    }

    pub fn relu(&self) -> Self {
        // written as a comparison so NaN passes through instead of becoming zero
        Self::derived(self.value().map(|v| if v < T::zero() { T::zero() } else { v }), Op::Relu(self.clone()))
    }

    /// Exact (erf) GELU.
    pub fn gelu(&self) -> Self {
        Self::derived(self.value().map(|v| v * gelu_cdf(v)), Op::Gelu(self.clone()))
    }

    pub fn sigmoid(&self) -> Self {
        Self::derived(
            self.value().map(|v| T::one() / (T::one() + (-v).exp())),
            Op::Sigmoid(self.clone()),
        )
    }

    pub fn max_pool_2x2(&self) -> Result<Self> {
        let (y, arg) = pool::max_pool_2x2(self.value())?;
        Ok(Self::derived(y, Op::ArgmaxPool { x: self.clone(), arg }))
    }

    pub fn max_pool_3x3_same(&self) -> Result<Self> {
        let (y, arg) = pool::max_pool_3x3_same(self.value())?;
        Ok(Self::derived(y, Op::ArgmaxPool { x: self.clone(), arg }))
    }

    pub fn avg_pool_3x3_same(&self) -> Result<Self> {
        let y = pool::avg_pool_3x3_same(self.value())?;
        Ok(Self::derived(y, Op::AvgPool3(self.clone())))
    }

    pub fn global_avg_pool(&self) -> Result<Self> {
        let y = pool::global_avg_pool(self.value())?;
        Ok(Self::derived(y, Op::GlobalAvgPool(self.clone())))
    }

    /// Broadcasting addition.
    pub fn add(&self, other: &Var<T>) -> Result<Self> {
        let y = broadcast::binary(self.value(), other.value(), |a, b| a + b)?;
        Ok(Self::derived(y, Op::Add(self.clone(), other.clone())))
    }

    /// Broadcasting elementwise product.
    pub fn mul(&self, other: &Var<T>) -> Result<Self> {
        let y = broadcast::binary(self.value(), other.value(), |a, b| a * b)?;
        Ok(Self::derived(y, Op::Mul(self.clone(), other.clone())))
    }

    /// Concatenation along the channel axis of NCHW tensors.
    pub fn concat_channels(parts: &[&Var<T>]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| TensorError::Invalid("concat of zero tensors".into()))?;
        let [n, _, h, w] = first.value().dims4()?;
        let mut channels = Vec::with_capacity(parts.len());
        for p in parts {
            let [pn, pc, ph, pw] = p.value().dims4()?;
            if (pn, ph, pw) != (n, h, w) {
                return Err(TensorError::Shape(format!(
                    "concat operands differ outside the channel axis: {:?} vs {:?}",
                    first.shape(),
                    p.shape()
                )));
            }
            channels.push(pc);
        }
        let total: usize = channels.iter().sum();
        let plane = h * w;
        let mut data = Vec::with_capacity(n * total * plane);
        for b in 0..n {
            for (p, &c) in parts.iter().zip(&channels) {
                data.extend_from_slice(&p.value().data()[b * c * plane..(b + 1) * c * plane]);
            }
        }
        let y = Tensor::from_vec(&[n, total, h, w], data)?;
        Ok(Self::derived(y, Op::Concat(parts.iter().map(|&p| p.clone()).collect())))
    }

    /// Channels `start..start + len`.
    pub fn narrow_channels(&self, start: usize, len: usize) -> Result<Self> {
        let [n, c, h, w] = self.value().dims4()?;
        if start + len > c || len == 0 {
            return Err(TensorError::Shape(format!(
                "channel range {start}..{} outside 0..{c}",
                start + len
            )));
        }
        let plane = h * w;
        let mut data = Vec::with_capacity(n * len * plane);
        for b in 0..n {
            let off = (b * c + start) * plane;
            data.extend_from_slice(&self.value().data()[off..off + len * plane]);
        }
        let y = Tensor::from_vec(&[n, len, h, w], data)?;
        Ok(Self::derived(y, Op::Narrow { x: self.clone(), start }))
    }

    /// Channel-interleaved concatenation `[a0, b0, a1, b1, ...]`.
    pub fn interleave_channels(&self, other: &Var<T>) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(TensorError::Shape(format!(
                "interleave operands differ: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let [n, c, h, w] = self.value().dims4()?;
        let plane = h * w;
        let mut data = Vec::with_capacity(2 * n * c * plane);
        for b in 0..n {
            for ci in 0..c {
                let off = (b * c + ci) * plane;
                data.extend_from_slice(&self.value().data()[off..off + plane]);
                data.extend_from_slice(&other.value().data()[off..off + plane]);
            }
        }
        let y = Tensor::from_vec(&[n, 2 * c, h, w], data)?;
        Ok(Self::derived(y, Op::Interleave(self.clone(), other.clone())))
    }

    /// Inverted dropout: zeroes elements with probability `rate` and scales
    /// survivors by `1 / (1 - rate)`. A rate of zero returns `self`.
    pub fn dropout<R: Rng + ?Sized>(&self, rate: f64, rng: &mut R) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(TensorError::Invalid(format!("dropout rate {rate} outside [0, 1)")));
        }
        if rate == 0.0 {
            return Ok(self.clone());
        }
        let keep = T::lit(1.0 / (1.0 - rate));
        let mask: Vec<T> = (0..self.value().numel())
            .map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep })
            .collect();
        let y = Tensor::from_vec(
            self.shape(),
            self.value().data().iter().zip(&mask).map(|(&v, &m)| v * m).collect(),
        )?;
        Ok(Self::derived(y, Op::Dropout { x: self.clone(), mask }))
    }

    /// Mean over all elements, as a one-element tensor.
    pub fn mean(&self) -> Self {
        let n = T::lit(self.value().numel() as f64);
        Self::derived(Tensor::scalar(self.value().sum() / n), Op::Mean(self.clone()))
    }

    /// Attaches an externally computed scalar `value = f(self)` whose
    /// gradient with respect to `self` is `grad`.
    pub fn external_scalar(&self, value: T, grad: Tensor<T>) -> Result<Self> {
        if grad.shape() != self.shape() {
            return Err(TensorError::Shape(format!(
                "external gradient {:?} does not match input {:?}",
                grad.shape(),
                self.shape()
            )));
        }
        Ok(Self::derived(Tensor::scalar(value), Op::External { x: self.clone(), grad }))
    }
}

/// Gradients produced by [`backward`], for parameters and for input leaves.
pub struct Gradients<T> {
    leaves: HashMap<u64, Tensor<T>>,
    params: HashMap<ParamId, Tensor<T>>,
}

impl<T: Float> Gradients<T> {
    pub fn wrt(&self, v: &Var<T>) -> Option<&Tensor<T>> {
        self.leaves.get(&v.node.id)
    }

    pub fn param(&self, id: ParamId) -> Option<&Tensor<T>> {
        self.params.get(&id)
    }

    pub fn params(&self) -> impl Iterator<Item = (ParamId, &Tensor<T>)> {
        self.params.iter().map(|(&k, v)| (k, v))
    }
}

fn topo_order<T: Float>(root: &Var<T>) -> Vec<Var<T>> {
    let mut order = Vec::new();
    let mut seen = HashSet::new();
    let mut stack = vec![(root.clone(), false)];
    while let Some((v, expanded)) = stack.pop() {
        if expanded {
            order.push(v);
            continue;
        }
        if !seen.insert(v.node.id) {
            continue;
        }
        stack.push((v.clone(), true));
        for p in v.node.op.parents() {
            if p.requires_grad() && !seen.contains(&p.node.id) {
                stack.push((p.clone(), false));
            }
        }
    }
    order
}

fn accumulate<T: Float>(grads: &mut HashMap<u64, Tensor<T>>, v: &Var<T>, g: Tensor<T>) {
    if !v.requires_grad() {
        return;
    }
    match grads.get_mut(&v.node.id) {
        Some(acc) => acc.add_assign_unchecked(&g),
        None => {
            grads.insert(v.node.id, g);
        }
    }
}

/// Back-propagates from `root`, seeding its gradient with ones.
pub fn backward<T: Float>(root: &Var<T>) -> Result<Gradients<T>> {
    let mut out = Gradients {
        leaves: HashMap::new(),
        params: HashMap::new(),
    };
    if !root.requires_grad() {
        return Ok(out);
    }
    let order = topo_order(root);
    let mut grads: HashMap<u64, Tensor<T>> = HashMap::new();
    grads.insert(root.node.id, Tensor::full(root.shape(), T::one()));
    for v in order.iter().rev() {
        let Some(dy) = grads.remove(&v.node.id) else {
            continue;
        };
        if let Op::Leaf = v.node.op {
            match v.node.param {
                Some(id) => out.params.insert(id, dy),
                None => out.leaves.insert(v.node.id, dy),
            };
            continue;
        }
        for (parent, g) in local_grads(v, &dy)? {
            accumulate(&mut grads, &parent, g);
        }
    }
    Ok(out)
}

fn local_grads<T: Float>(v: &Var<T>, dy: &Tensor<T>) -> Result<Vec<(Var<T>, Tensor<T>)>> {
    let mut res = Vec::new();
    let y = v.value();
    match &v.node.op {
        Op::Leaf => {}
        Op::Conv2d { x, w, b, opts } => {
            let want = [x.requires_grad(), w.requires_grad(), b.as_ref().is_some_and(|b| b.requires_grad())];
            let g = conv::conv2d_backward(x.value(), w.value(), dy, *opts, want)?;
            push_conv_grads(&mut res, x, w, b, g)?;
        }
        Op::ConvTranspose2d { x, w, b, opts } => {
            let want = [x.requires_grad(), w.requires_grad(), b.as_ref().is_some_and(|b| b.requires_grad())];
            let g = conv::conv_transpose2d_backward(x.value(), w.value(), dy, *opts, want)?;
            push_conv_grads(&mut res, x, w, b, g)?;
        }
        Op::BatchNorm { x, gamma, beta, state } => {
            let (dx, dg, db) = norm::batch_norm_backward(dy, gamma.value(), state)?;
            res.push((x.clone(), dx));
            res.push((gamma.clone(), dg));
            res.push((beta.clone(), db));
        }
        Op::Relu(x) => res.push((x.clone(), y.zip_map(dy, |yv, g| if yv > T::zero() { g } else { T::zero() })?)),
        Op::Gelu(x) => {
            let inv_sqrt_2pi = T::lit(1.0 / (2.0 * std::f64::consts::PI).sqrt());
            let dx = x.value().zip_map(dy, |xv, g| {
                g * (gelu_cdf(xv) + xv * inv_sqrt_2pi * (-(xv * xv) * T::lit(0.5)).exp())
            })?;
            res.push((x.clone(), dx));
        }
        Op::Sigmoid(x) => res.push((x.clone(), y.zip_map(dy, |s, g| g * s * (T::one() - s))?)),
        Op::ArgmaxPool { x, arg } => res.push((x.clone(), pool::scatter_argmax(x.shape(), dy, arg))),
        Op::AvgPool3(x) => res.push((x.clone(), pool::avg_pool_3x3_same_backward(dy)?)),
        Op::GlobalAvgPool(x) => res.push((x.clone(), pool::global_avg_pool_backward(x.shape(), dy))),
        Op::Add(a, b) => {
            res.push((a.clone(), broadcast::reduce_to(dy, a.shape())?));
            res.push((b.clone(), broadcast::reduce_to(dy, b.shape())?));
        }
        Op::Mul(a, b) => {
            if a.requires_grad() {
                let g = broadcast::binary(dy, b.value(), |g, bv| g * bv)?;
                res.push((a.clone(), broadcast::reduce_to(&g, a.shape())?));
            }
            if b.requires_grad() {
                let g = broadcast::binary(dy, a.value(), |g, av| g * av)?;
                res.push((b.clone(), broadcast::reduce_to(&g, b.shape())?));
            }
        }
        Op::Concat(parts) => {
            let [n, total, h, w] = dy.dims4()?;
            let plane = h * w;
            let mut offset = 0;
            for p in parts {
                let c = p.shape()[1];
                if p.requires_grad() {
                    let mut data = Vec::with_capacity(n * c * plane);
                    for b in 0..n {
                        let off = (b * total + offset) * plane;
                        data.extend_from_slice(&dy.data()[off..off + c * plane]);
                    }
                    res.push((p.clone(), Tensor::from_vec(p.shape(), data)?));
                }
                offset += c;
            }
        }
        Op::Narrow { x, start } => {
            let [n, c, h, w] = x.value().dims4()?;
            let len = dy.shape()[1];
            let plane = h * w;
            let mut dx = Tensor::zeros(x.shape());
            for b in 0..n {
                let dst = (b * c + start) * plane;
                let src = b * len * plane;
                dx.data_mut()[dst..dst + len * plane].copy_from_slice(&dy.data()[src..src + len * plane]);
            }
            res.push((x.clone(), dx));
        }
        Op::Interleave(a, b) => {
            let [n, c, h, w] = a.value().dims4()?;
            let plane = h * w;
            let mut da = Vec::with_capacity(n * c * plane);
            let mut db = Vec::with_capacity(n * c * plane);
            for bi in 0..n {
                for ci in 0..c {
                    let off = (bi * 2 * c + 2 * ci) * plane;
                    da.extend_from_slice(&dy.data()[off..off + plane]);
                    db.extend_from_slice(&dy.data()[off + plane..off + 2 * plane]);
                }
            }
            res.push((a.clone(), Tensor::from_vec(a.shape(), da)?));
            res.push((b.clone(), Tensor::from_vec(b.shape(), db)?));
        }
        Op::Dropout { x, mask } => {
            let dx = dy.data().iter().zip(mask).map(|(&g, &m)| g * m).collect();
            res.push((x.clone(), Tensor::from_vec(x.shape(), dx)?));
        }
        Op::Mean(x) => {
            let g = dy.data()[0] / T::lit(x.value().numel() as f64);
            res.push((x.clone(), Tensor::full(x.shape(), g)));
        }
        Op::External { x, grad } => {
            let s = dy.data()[0];
            res.push((x.clone(), grad.map(|g| g * s)));
        }
    }
    Ok(res)
}

fn push_conv_grads<T: Float>(
    res: &mut Vec<(Var<T>, Tensor<T>)>,
    x: &Var<T>,
    w: &Var<T>,
    b: &Option<Var<T>>,
    g: conv::ConvGrads<T>,
) -> Result<()> {
    if let Some(dx) = g.x {
        res.push((x.clone(), dx));
    }
    if let Some(dw) = g.w {
        res.push((w.clone(), dw));
    }
    if let (Some(b), Some(db)) = (b, g.bias) {
        res.push((b.clone(), db.reshape(b.shape())?));
    }
    Ok(())
}
