use crate::error::{Result, TensorError};
use crate::float::Float;
use crate::tensor::Tensor;

/// Per-channel statistics and normalized activations saved for backward.
pub struct BatchNormState<T> {
    pub xhat: Tensor<T>,
    pub inv_std: Vec<T>,
    /// Batch mean and biased variance; `None` when running statistics were
    /// used.
    pub batch_mean: Option<Vec<T>>,
    pub batch_var: Option<Vec<T>>,
}

fn check<T: Float>(x: &Tensor<T>, params: &[&Tensor<T>]) -> Result<[usize; 4]> {
    let d = x.dims4()?;
    for p in params {
        if p.numel() != d[1] {
            return Err(TensorError::Shape(format!(
                "batch-norm parameter of length {} for {} channels",
                p.numel(),
                d[1]
            )));
        }
    }
    Ok(d)
}

/// Normalizes with batch statistics (`running = None`) or with the given
/// running mean and variance.
pub fn batch_norm<T: Float>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    running: Option<(&Tensor<T>, &Tensor<T>)>,
    eps: T,
) -> Result<(Tensor<T>, BatchNormState<T>)> {
    let [n, c, h, w] = check(x, &[gamma, beta])?;
    let p = h * w;
    let m = T::lit((n * p) as f64);
    let (mean, var, from_batch) = match running {
        Some((rm, rv)) => {
            check(x, &[rm, rv])?;
            (rm.data().to_vec(), rv.data().to_vec(), false)
        }
        None => {
            let mut mean = vec![T::zero(); c];
            let mut var = vec![T::zero(); c];
            for ci in 0..c {
                let mut s = T::zero();
                for b in 0..n {
                    let off = (b * c + ci) * p;
                    s += x.data()[off..off + p].iter().copied().sum::<T>();
                }
                let mu = s / m;
                let mut v = T::zero();
                for b in 0..n {
                    let off = (b * c + ci) * p;
                    for &xv in &x.data()[off..off + p] {
                        v += (xv - mu) * (xv - mu);
                    }
                }
                mean[ci] = mu;
                var[ci] = v / m;
            }
            (mean, var, true)
        }
    };
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let mut xhat = Tensor::zeros(x.shape());
    let mut y = Tensor::zeros(x.shape());
    for b in 0..n {
        for ci in 0..c {
            let off = (b * c + ci) * p;
            let (mu, is, g, bt) = (mean[ci], inv_std[ci], gamma.data()[ci], beta.data()[ci]);
            let xs = &x.data()[off..off + p];
            for ((xh, yv), &xv) in xhat.data_mut()[off..off + p]
                .iter_mut()
                .zip(&mut y.data_mut()[off..off + p])
                .zip(xs)
            {
                *xh = (xv - mu) * is;
                *yv = g * *xh + bt;
            }
        }
    }
    Ok((
        y,
        BatchNormState {
            xhat,
            inv_std,
            batch_mean: from_batch.then(|| mean),
            batch_var: from_batch.then(|| var),
        },
    ))
}

/// Returns `(dx, dgamma, dbeta)`.
pub fn batch_norm_backward<T: Float>(
    dy: &Tensor<T>,
    gamma: &Tensor<T>,
    state: &BatchNormState<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let [n, c, h, w] = dy.dims4()?;
    let p = h * w;
    let m = T::lit((n * p) as f64);
    let batch_stats = state.batch_mean.is_some();
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for ci in 0..c {
        for b in 0..n {
            let off = (b * c + ci) * p;
            for (&g, &xh) in dy.data()[off..off + p].iter().zip(&state.xhat.data()[off..off + p]) {
                dgamma[ci] += g * xh;
                dbeta[ci] += g;
            }
        }
    }
    let mut dx = Tensor::zeros(dy.shape());
    for ci in 0..c {
        let scale = gamma.data()[ci] * state.inv_std[ci];
        for b in 0..n {
            let off = (b * c + ci) * p;
            let dys = &dy.data()[off..off + p];
            let xhs = &state.xhat.data()[off..off + p];
            let out = &mut dx.data_mut()[off..off + p];
            if batch_stats {
                // dx = gamma * inv_std / m * (m * dy - sum(dy) - xhat * sum(dy * xhat))
                let k = scale / m;
                for ((o, &g), &xh) in out.iter_mut().zip(dys).zip(xhs) {
                    *o = k * (m * g - dbeta[ci] - xh * dgamma[ci]);
                }
            } else {
                for (o, &g) in out.iter_mut().zip(dys) {
                    *o = scale * g;
                }
            }
        }
    }
    Ok((
        dx,
        Tensor::from_vec(gamma.shape(), dgamma)?,
        Tensor::from_vec(gamma.shape(), dbeta)?,
    ))
}
