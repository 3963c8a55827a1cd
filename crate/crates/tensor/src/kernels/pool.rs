use crate::error::{Result, TensorError};
use crate::float::Float;
use crate::tensor::Tensor;

/// 2x2 max pooling with stride 2. Returns the output and, per output
/// element, the flat index of the winning input element.
pub fn max_pool_2x2<T: Float>(x: &Tensor<T>) -> Result<(Tensor<T>, Vec<u32>)> {
    let [n, c, h, w] = x.dims4()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(TensorError::Shape(format!(
            "2x2 pooling needs even spatial dims, got {h}x{w}"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut y = Vec::with_capacity(n * c * oh * ow);
    let mut arg = Vec::with_capacity(n * c * oh * ow);
    let xd = x.data();
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let i0 = base + 2 * oy * w + 2 * ox;
                let mut best = i0;
                for i in [i0 + 1, i0 + w, i0 + w + 1] {
                    if xd[i] > xd[best] {
                        best = i;
                    }
                }
                y.push(xd[best]);
                arg.push(best as u32);
            }
        }
    }
    Ok((Tensor::from_vec(&[n, c, oh, ow], y)?, arg))
}

/// Routes output gradients back to the recorded argmax positions.
pub fn scatter_argmax<T: Float>(input_shape: &[usize], dy: &Tensor<T>, arg: &[u32]) -> Tensor<T> {
    let mut dx = Tensor::zeros(input_shape);
    let d = dx.data_mut();
    for (&i, &g) in arg.iter().zip(dy.data()) {
        d[i as usize] += g;
    }
    dx
}

fn window(len: usize, o: usize) -> (usize, usize) {
    (o.saturating_sub(1), (o + 2).min(len))
}

/// 3x3 max pooling, stride 1, "same" padding. Padded cells never win; ties go
/// to the first cell in row-major window order.
///
/// Computed separably: a horizontal pass keeps the leftmost row maximum, and
/// the vertical pass keeps the topmost of those, which is the same winner.
pub fn max_pool_3x3_same<T: Float>(x: &Tensor<T>) -> Result<(Tensor<T>, Vec<u32>)> {
    let [n, c, h, w] = x.dims4()?;
    let xd = x.data();
    let mut y = vec![T::zero(); xd.len()];
    let mut arg = vec![0u32; xd.len()];
    let mut row_best = vec![0usize; h * w];
    for plane in 0..n * c {
        let base = plane * h * w;
        for iy in 0..h {
            for ox in 0..w {
                let (x0, x1) = window(w, ox);
                let mut best = base + iy * w + x0;
                for i in best + 1..base + iy * w + x1 {
                    if xd[i] > xd[best] {
                        best = i;
                    }
                }
                row_best[iy * w + ox] = best;
            }
        }
        for oy in 0..h {
            let (y0, y1) = window(h, oy);
            for ox in 0..w {
                let mut best = row_best[y0 * w + ox];
                for iy in y0 + 1..y1 {
                    let cand = row_best[iy * w + ox];
                    if xd[cand] > xd[best] {
                        best = cand;
                    }
                }
                y[base + oy * w + ox] = xd[best];
                arg[base + oy * w + ox] = best as u32;
            }
        }
    }
    Ok((Tensor::from_vec(&[n, c, h, w], y)?, arg))
}

/// Clipped 3x3 box sum of every plane. The operator is symmetric, so it is
/// also its own adjoint.
fn box_sum_3x3<T: Float>(src: &[T], dst: &mut [T], planes: usize, h: usize, w: usize) {
    let mut rows = vec![T::zero(); h * w];
    for plane in 0..planes {
        let s = &src[plane * h * w..(plane + 1) * h * w];
        for iy in 0..h {
            let r = &s[iy * w..(iy + 1) * w];
            let out = &mut rows[iy * w..(iy + 1) * w];
            for ox in 0..w {
                let (x0, x1) = window(w, ox);
                let mut acc = T::zero();
                for &v in &r[x0..x1] {
                    acc += v;
                }
                out[ox] = acc;
            }
        }
        let d = &mut dst[plane * h * w..(plane + 1) * h * w];
        for oy in 0..h {
            let (y0, y1) = window(h, oy);
            let out = &mut d[oy * w..(oy + 1) * w];
            out.copy_from_slice(&rows[y0 * w..(y0 + 1) * w]);
            for iy in y0 + 1..y1 {
                for (o, &v) in out.iter_mut().zip(&rows[iy * w..(iy + 1) * w]) {
                    *o += v;
                }
            }
        }
    }
}

fn window_count(h: usize, w: usize, oy: usize, ox: usize) -> usize {
    let (y0, y1) = window(h, oy);
    let (x0, x1) = window(w, ox);
    (y1 - y0) * (x1 - x0)
}

/// 3x3 average pooling, stride 1, "same" padding; the divisor counts only
/// cells inside the image.
pub fn avg_pool_3x3_same<T: Float>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, c, h, w] = x.dims4()?;
    let mut y = Tensor::zeros(&[n, c, h, w]);
    box_sum_3x3(x.data(), y.data_mut(), n * c, h, w);
    let inv: Vec<T> = (0..h * w)
        .map(|i| T::one() / T::lit(window_count(h, w, i / w, i % w) as f64))
        .collect();
    for plane in y.data_mut().chunks_exact_mut(h * w) {
        for (v, &s) in plane.iter_mut().zip(&inv) {
            *v *= s;
        }
    }
    Ok(y)
}

pub fn avg_pool_3x3_same_backward<T: Float>(dy: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, c, h, w] = dy.dims4()?;
    let inv: Vec<T> = (0..h * w)
        .map(|i| T::one() / T::lit(window_count(h, w, i / w, i % w) as f64))
        .collect();
    let scaled: Vec<T> = dy
        .data()
        .chunks_exact(h * w)
        .flat_map(|plane| plane.iter().zip(&inv).map(|(&g, &s)| g * s))
        .collect();
    let mut dx = Tensor::zeros(&[n, c, h, w]);
    box_sum_3x3(&scaled, dx.data_mut(), n * c, h, w);
    Ok(dx)
}

/// Spatial mean per channel: `[n, c, h, w] -> [n, c, 1, 1]`.
pub fn global_avg_pool<T: Float>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, c, h, w] = x.dims4()?;
    let p = h * w;
    let inv = T::one() / T::lit(p as f64);
    let data = x
        .data()
        .chunks(p)
        .map(|plane| plane.iter().copied().sum::<T>() * inv)
        .collect();
    Tensor::from_vec(&[n, c, 1, 1], data)
}

pub fn global_avg_pool_backward<T: Float>(input_shape: &[usize], dy: &Tensor<T>) -> Tensor<T> {
    let p: usize = input_shape[2] * input_shape[3];
    let inv = T::one() / T::lit(p as f64);
    let mut dx = Tensor::zeros(input_shape);
    for (plane, &g) in dx.data_mut().chunks_mut(p).zip(dy.data()) {
        plane.fill(g * inv);
    }
    dx
}
