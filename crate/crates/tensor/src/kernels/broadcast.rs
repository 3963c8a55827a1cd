use crate::error::{Result, TensorError};
use crate::float::Float;
use crate::tensor::Tensor;

/// Result shape of broadcasting two shapes of equal rank; a size-1 axis
/// stretches to match the other operand.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    if a.len() != b.len() {
        return Err(TensorError::Shape(format!("rank mismatch: {a:?} vs {b:?}")));
    }
    a.iter()
        .zip(b)
        .map(|(&x, &y)| match (x, y) {
            _ if x == y => Ok(x),
            (1, _) => Ok(y),
            (_, 1) => Ok(x),
            _ => Err(TensorError::Shape(format!("cannot broadcast {a:?} with {b:?}"))),
        })
        .collect()
}

fn as4(shape: &[usize]) -> Result<[usize; 4]> {
    match *shape {
        [n, c, h, w] => Ok([n, c, h, w]),
        [c, h, w] => Ok([1, c, h, w]),
        [h, w] => Ok([1, 1, h, w]),
        [w] => Ok([1, 1, 1, w]),
        _ => Err(TensorError::Shape(format!("broadcast supports rank <= 4, got {shape:?}"))),
    }
}

fn strides(d: [usize; 4]) -> [usize; 4] {
    let s = [d[1] * d[2] * d[3], d[2] * d[3], d[3], 1];
    [0, 1, 2, 3].map(|i| if d[i] == 1 { 0 } else { s[i] })
}

/// Elementwise `f(a, b)` with broadcasting.
pub fn binary<T: Float>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
    if a.shape() == b.shape() {
        return a.zip_map(b, f);
    }
    let out_shape = broadcast_shape(a.shape(), b.shape())?;
    let od = as4(&out_shape)?;
    let (sa, sb) = (strides(as4(a.shape())?), strides(as4(b.shape())?));
    let mut out = Vec::with_capacity(od.iter().product());
    let (ad, bd) = (a.data(), b.data());
    for n in 0..od[0] {
        for c in 0..od[1] {
            for h in 0..od[2] {
                let ia = n * sa[0] + c * sa[1] + h * sa[2];
                let ib = n * sb[0] + c * sb[1] + h * sb[2];
                for w in 0..od[3] {
                    out.push(f(ad[ia + w * sa[3]], bd[ib + w * sb[3]]));
                }
            }
        }
    }
    Tensor::from_vec(&out_shape, out)
}

/// Sums `grad` (shaped like the broadcast output) down to `shape`.
pub fn reduce_to<T: Float>(grad: &Tensor<T>, shape: &[usize]) -> Result<Tensor<T>> {
    if grad.shape() == shape {
        return Ok(grad.clone());
    }
    let od = as4(grad.shape())?;
    let st = strides(as4(shape)?);
    let mut out = Tensor::zeros(shape);
    let o = out.data_mut();
    let g = grad.data();
    let mut k = 0;
    for n in 0..od[0] {
        for c in 0..od[1] {
            for h in 0..od[2] {
                let base = n * st[0] + c * st[1] + h * st[2];
                for w in 0..od[3] {
                    o[base + w * st[3]] += g[k];
                    k += 1;
                }
            }
        }
    }
    Ok(out)
}
