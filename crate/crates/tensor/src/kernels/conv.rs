//! Convolution kernels over NCHW buffers.
//!
//! Dense convolutions lower to im2col + GEMM. Grouped convolutions
//! (depthwise and friends) use direct loops since their per-group GEMMs
//! are too thin to pay off. Transposed convolution is the adjoint of the
//! dense path: GEMM into a column buffer, then col2im.

use crate::error::{Result, TensorError};
use crate::float::{matmul, Float};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv2dOptions {
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
}

impl Default for Conv2dOptions {
    fn default() -> Self {
        Self {
            stride: 1,
            padding: 0,
            groups: 1,
        }
    }
}

impl Conv2dOptions {
    /// Stride 1 with "same" padding for an odd kernel.
    pub fn same(kernel: usize) -> Self {
        Self {
            stride: 1,
            padding: kernel / 2,
            groups: 1,
        }
    }

    pub fn with_groups(mut self, groups: usize) -> Self {
        self.groups = groups;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvTranspose2dOptions {
    pub stride: usize,
    pub padding: usize,
    pub output_padding: usize,
}

impl ConvTranspose2dOptions {
    /// Kernel-3, stride-2 upsampling that exactly doubles the spatial dims.
    pub fn double() -> Self {
        Self {
            stride: 2,
            padding: 1,
            output_padding: 1,
        }
    }
}

/// Geometry of one convolution window sweep: an `h x w` image scanned by a
/// `kh x kw` kernel producing an `oh x ow` grid.
#[derive(Clone, Copy, Debug)]
struct Sweep {
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: usize,
    oh: usize,
    ow: usize,
}

impl Sweep {
    /// Output columns `ox` whose input column `ox * stride + kx - padding`
    /// falls inside the image.
    fn valid_cols(&self, kx: usize) -> (usize, usize) {
        valid_range(self.w, self.ow, kx, self.stride, self.padding)
    }

    fn valid_rows(&self, ky: usize) -> (usize, usize) {
        valid_range(self.h, self.oh, ky, self.stride, self.padding)
    }
}

fn valid_range(len: usize, out: usize, k: usize, stride: usize, padding: usize) -> (usize, usize) {
    // o * stride + k - padding in [0, len)
    let lo = if k >= padding {
        0
    } else {
        (padding - k).div_ceil(stride)
    };
    let hi = if len + padding <= k {
        0
    } else {
        ((len - 1 + padding - k) / stride + 1).min(out)
    };
    (lo.min(hi), hi)
}

fn conv_out(len: usize, k: usize, stride: usize, padding: usize) -> Result<usize> {
    if stride == 0 {
        return Err(TensorError::Invalid("stride must be positive".into()));
    }
    if len + 2 * padding < k {
        return Err(TensorError::Shape(format!(
            "kernel {k} larger than padded input {len}+2*{padding}"
        )));
    }
    Ok((len + 2 * padding - k) / stride + 1)
}

/// Unfold one `[c, h, w]` image into a `[c * kh * kw, oh * ow]` matrix.
fn im2col<T: Float>(x: &[T], c: usize, g: &Sweep, col: &mut [T]) {
    let p = g.oh * g.ow;
    for ci in 0..c {
        let plane = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.kh {
            let (ry0, ry1) = g.valid_rows(ky);
            for kx in 0..g.kw {
                let row = (ci * g.kh + ky) * g.kw + kx;
                let dst = &mut col[row * p..(row + 1) * p];
                let (cx0, cx1) = g.valid_cols(kx);
                for oy in 0..g.oh {
                    let out = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    if oy < ry0 || oy >= ry1 || cx0 >= cx1 {
                        out.fill(T::zero());
                        continue;
                    }
                    let iy = oy * g.stride + ky - g.padding;
                    let src = &plane[iy * g.w..(iy + 1) * g.w];
                    out[..cx0].fill(T::zero());
                    out[cx1..].fill(T::zero());
                    if g.stride == 1 {
                        let ix0 = cx0 + kx - g.padding;
                        out[cx0..cx1].copy_from_slice(&src[ix0..ix0 + (cx1 - cx0)]);
                    } else {
                        for (ox, o) in out.iter_mut().enumerate().take(cx1).skip(cx0) {
                            *o = src[ox * g.stride + kx - g.padding];
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add a column matrix back into an image.
fn col2im<T: Float>(col: &[T], c: usize, g: &Sweep, x: &mut [T]) {
    let p = g.oh * g.ow;
    for ci in 0..c {
        let plane = &mut x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.kh {
            let (ry0, ry1) = g.valid_rows(ky);
            for kx in 0..g.kw {
                let row = (ci * g.kh + ky) * g.kw + kx;
                let src = &col[row * p..(row + 1) * p];
                let (cx0, cx1) = g.valid_cols(kx);
                if cx0 >= cx1 {
                    continue;
                }
                for oy in ry0..ry1 {
                    let iy = oy * g.stride + ky - g.padding;
                    let dst = &mut plane[iy * g.w..(iy + 1) * g.w];
                    let s = &src[oy * g.ow..(oy + 1) * g.ow];
                    for ox in cx0..cx1 {
                        dst[ox * g.stride + kx - g.padding] += s[ox];
                    }
                }
            }
        }
    }
}

fn check_conv(x: &[usize; 4], w: &[usize], bias: Option<usize>, opts: &Conv2dOptions) -> Result<Sweep> {
    let &[cout, cin_g, kh, kw] = w else {
        return Err(TensorError::Shape(format!("conv weight must be 4-D, got {w:?}")));
    };
    let [_, cin, h, wd] = *x;
    if opts.groups == 0 || cin % opts.groups != 0 || cout % opts.groups != 0 {
        return Err(TensorError::Invalid(format!(
            "groups {} must divide in {cin} and out {cout} channels",
            opts.groups
        )));
    }
    if cin / opts.groups != cin_g {
        return Err(TensorError::Shape(format!(
            "conv weight expects {} input channels per group, input has {cin} channels over {} groups",
            cin_g, opts.groups
        )));
    }
    if let Some(b) = bias {
        if b != cout {
            return Err(TensorError::Shape(format!("bias length {b} != out channels {cout}")));
        }
    }
    let oh = conv_out(h, kh, opts.stride, opts.padding)?;
    let ow = conv_out(wd, kw, opts.stride, opts.padding)?;
    Ok(Sweep {
        h,
        w: wd,
        kh,
        kw,
        stride: opts.stride,
        padding: opts.padding,
        oh,
        ow,
    })
}

pub fn conv2d<T: Float>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    opts: Conv2dOptions,
) -> Result<Tensor<T>> {
    let xd = x.dims4()?;
    let g = check_conv(&xd, w.shape(), bias.map(|b| b.numel()), &opts)?;
    let [n, cin, h, wd] = xd;
    let cout = w.shape()[0];
    let p = g.oh * g.ow;
    let mut y = Tensor::zeros(&[n, cout, g.oh, g.ow]);
    if opts.groups == 1 {
        let k = cin * g.kh * g.kw;
        let pointwise = g.kh == 1 && g.kw == 1 && g.stride == 1 && g.padding == 0;
        let mut col = if pointwise { Vec::new() } else { vec![T::zero(); k * p] };
        for b in 0..n {
            let xb = &x.data()[b * cin * h * wd..(b + 1) * cin * h * wd];
            let cols: &[T] = if pointwise {
                xb
            } else {
                im2col(xb, cin, &g, &mut col);
                &col
            };
            let yb = &mut y.data_mut()[b * cout * p..(b + 1) * cout * p];
            matmul(cout, k, p, w.data(), false, cols, false, yb, T::zero());
        }
    } else {
        grouped_forward(x.data(), w.data(), &mut y, xd, cout, &g, opts.groups);
    }
    if let Some(bias) = bias {
        add_channel_bias(&mut y, bias.data());
    }
    Ok(y)
}

fn add_channel_bias<T: Float>(y: &mut Tensor<T>, bias: &[T]) {
    let [n, c, h, w] = y.dims4().expect("4-D output");
    let p = h * w;
    for b in 0..n {
        for (ci, &bv) in bias.iter().enumerate().take(c) {
            let off = (b * c + ci) * p;
            for v in &mut y.data_mut()[off..off + p] {
                *v += bv;
            }
        }
    }
}

fn channel_sums<T: Float>(dy: &Tensor<T>) -> Tensor<T> {
    let [n, c, h, w] = dy.dims4().expect("4-D gradient");
    let p = h * w;
    let mut out = vec![T::zero(); c];
    for b in 0..n {
        for (ci, o) in out.iter_mut().enumerate() {
            let off = (b * c + ci) * p;
            *o += dy.data()[off..off + p].iter().copied().sum::<T>();
        }
    }
    Tensor::from_vec(&[c], out).expect("bias gradient shape")
}

fn grouped_forward<T: Float>(
    x: &[T],
    w: &[T],
    y: &mut Tensor<T>,
    [n, cin, h, wd]: [usize; 4],
    cout: usize,
    g: &Sweep,
    groups: usize,
) {
    let cig = cin / groups;
    let cog = cout / groups;
    let p = g.oh * g.ow;
    let ydata = y.data_mut();
    for b in 0..n {
        for oc in 0..cout {
            let grp = oc / cog;
            let yplane = &mut ydata[(b * cout + oc) * p..(b * cout + oc + 1) * p];
            for icg in 0..cig {
                let ic = grp * cig + icg;
                let xplane = &x[(b * cin + ic) * h * wd..(b * cin + ic + 1) * h * wd];
                for ky in 0..g.kh {
                    let (ry0, ry1) = g.valid_rows(ky);
                    for kx in 0..g.kw {
                        let wv = w[((oc * cig + icg) * g.kh + ky) * g.kw + kx];
                        let (cx0, cx1) = g.valid_cols(kx);
                        if cx0 >= cx1 {
                            continue;
                        }
                        for oy in ry0..ry1 {
                            let iy = oy * g.stride + ky - g.padding;
                            let xrow = &xplane[iy * wd..(iy + 1) * wd];
                            let yrow = &mut yplane[oy * g.ow..(oy + 1) * g.ow];
                            if g.stride == 1 {
                                let off = kx as isize - g.padding as isize;
                                let xs = &xrow[(cx0 as isize + off) as usize..(cx1 as isize + off) as usize];
                                for (yv, &xv) in yrow[cx0..cx1].iter_mut().zip(xs) {
                                    *yv += wv * xv;
                                }
                            } else {
                                for ox in cx0..cx1 {
                                    yrow[ox] += wv * xrow[ox * g.stride + kx - g.padding];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn grouped_backward<T: Float>(
    x: &[T],
    w: &[T],
    dy: &[T],
    mut dx: Option<&mut [T]>,
    mut dw: Option<&mut [T]>,
    [n, cin, h, wd]: [usize; 4],
    cout: usize,
    g: &Sweep,
    groups: usize,
) {
    let cig = cin / groups;
    let cog = cout / groups;
    let p = g.oh * g.ow;
    for b in 0..n {
        for oc in 0..cout {
            let grp = oc / cog;
            let dyplane = &dy[(b * cout + oc) * p..(b * cout + oc + 1) * p];
            for icg in 0..cig {
                let ic = grp * cig + icg;
                let xoff = (b * cin + ic) * h * wd;
                for ky in 0..g.kh {
                    let (ry0, ry1) = g.valid_rows(ky);
                    for kx in 0..g.kw {
                        let widx = ((oc * cig + icg) * g.kh + ky) * g.kw + kx;
                        let (cx0, cx1) = g.valid_cols(kx);
                        if cx0 >= cx1 {
                            continue;
                        }
                        let wv = w[widx];
                        let mut acc = T::zero();
                        for oy in ry0..ry1 {
                            let iy = oy * g.stride + ky - g.padding;
                            let dyrow = &dyplane[oy * g.ow + cx0..oy * g.ow + cx1];
                            let row = xoff + iy * wd;
                            if g.stride == 1 {
                                let ix0 = row + cx0 + kx - g.padding;
                                let span = ix0..ix0 + (cx1 - cx0);
                                if dw.is_some() {
                                    acc += dot(dyrow, &x[span.clone()]);
                                }
                                if let Some(dx) = dx.as_deref_mut() {
                                    for (d, &gy) in dx[span].iter_mut().zip(dyrow) {
                                        *d += wv * gy;
                                    }
                                }
                            } else {
                                for (ox, &gy) in (cx0..cx1).zip(dyrow) {
                                    let ix = row + ox * g.stride + kx - g.padding;
                                    acc += gy * x[ix];
                                    if let Some(dx) = dx.as_deref_mut() {
                                        dx[ix] += wv * gy;
                                    }
                                }
                            }
                        }
                        if let Some(dw) = dw.as_deref_mut() {
                            dw[widx] += acc;
                        }
                    }
                }
            }
        }
    }
}

/// Dot product with four independent accumulators so the loop vectorizes.
fn dot<T: Float>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += *x * *y;
    }
    s
}

/// Gradients of [`conv2d`] with respect to its input, weight and bias.
/// Only the requested gradients are computed.
pub struct ConvGrads<T> {
    pub x: Option<Tensor<T>>,
    pub w: Option<Tensor<T>>,
    pub bias: Option<Tensor<T>>,
}

pub fn conv2d_backward<T: Float>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    dy: &Tensor<T>,
    opts: Conv2dOptions,
    want: [bool; 3],
) -> Result<ConvGrads<T>> {
    let xd = x.dims4()?;
    let g = check_conv(&xd, w.shape(), None, &opts)?;
    let [n, cin, h, wd] = xd;
    let cout = w.shape()[0];
    let p = g.oh * g.ow;
    if dy.shape() != [n, cout, g.oh, g.ow] {
        return Err(TensorError::Shape(format!(
            "conv output gradient {:?} does not match forward output",
            dy.shape()
        )));
    }
    let mut dx = want[0].then(|| Tensor::zeros(x.shape()));
    let mut dw = want[1].then(|| Tensor::zeros(w.shape()));
    if opts.groups == 1 {
        let k = cin * g.kh * g.kw;
        let pointwise = g.kh == 1 && g.kw == 1 && g.stride == 1 && g.padding == 0;
        let mut col = vec![T::zero(); if pointwise { 0 } else { k * p }];
        let mut dcol = vec![T::zero(); if pointwise || dx.is_none() { 0 } else { k * p }];
        for b in 0..n {
            let xb = &x.data()[b * cin * h * wd..(b + 1) * cin * h * wd];
            let dyb = &dy.data()[b * cout * p..(b + 1) * cout * p];
            if let Some(dw) = dw.as_mut() {
                let cols: &[T] = if pointwise {
                    xb
                } else {
                    im2col(xb, cin, &g, &mut col);
                    &col
                };
                matmul(cout, p, k, dyb, false, cols, true, dw.data_mut(), T::one());
            }
            if let Some(dx) = dx.as_mut() {
                let dxb = &mut dx.data_mut()[b * cin * h * wd..(b + 1) * cin * h * wd];
                if pointwise {
                    matmul(k, cout, p, w.data(), true, dyb, false, dxb, T::zero());
                } else {
                    matmul(k, cout, p, w.data(), true, dyb, false, &mut dcol, T::zero());
                    col2im(&dcol, cin, &g, dxb);
                }
            }
        }
    } else {
        grouped_backward(
            x.data(),
            w.data(),
            dy.data(),
            dx.as_mut().map(|t| t.data_mut()),
            dw.as_mut().map(|t| t.data_mut()),
            xd,
            cout,
            &g,
            opts.groups,
        );
    }
    Ok(ConvGrads {
        x: dx,
        w: dw,
        bias: want[2].then(|| channel_sums(dy)),
    })
}

fn transpose_sweep(x: &[usize; 4], w: &[usize], opts: &ConvTranspose2dOptions) -> Result<(usize, Sweep)> {
    let &[cin_w, cout, kh, kw] = w else {
        return Err(TensorError::Shape(format!(
            "transposed conv weight must be 4-D [in, out, kh, kw], got {w:?}"
        )));
    };
    let [_, cin, h, wd] = *x;
    if cin_w != cin {
        return Err(TensorError::Shape(format!(
            "transposed conv weight expects {cin_w} input channels, input has {cin}"
        )));
    }
    if opts.stride == 0 || opts.output_padding >= opts.stride {
        return Err(TensorError::Invalid(format!(
            "output padding {} must be smaller than stride {}",
            opts.output_padding, opts.stride
        )));
    }
    let out = |len: usize, k: usize| -> Result<usize> {
        let full = (len - 1) * opts.stride + k + opts.output_padding;
        full.checked_sub(2 * opts.padding)
            .filter(|&v| v > 0)
            .ok_or_else(|| TensorError::Shape("transposed conv output would be empty".into()))
    };
    let oh = out(h, kh)?;
    let ow = out(wd, kw)?;
    // The forward pass scatters an h x w grid into an oh x ow image; that is
    // the col2im side of a convolution over the oh x ow image.
    Ok((
        cout,
        Sweep {
            h: oh,
            w: ow,
            kh,
            kw,
            stride: opts.stride,
            padding: opts.padding,
            oh: h,
            ow: wd,
        },
    ))
}

/// Transposed convolution with weight layout `[in, out, kh, kw]`.
pub fn conv_transpose2d<T: Float>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    opts: ConvTranspose2dOptions,
) -> Result<Tensor<T>> {
    let xd = x.dims4()?;
    let (cout, g) = transpose_sweep(&xd, w.shape(), &opts)?;
    if let Some(b) = bias {
        if b.numel() != cout {
            return Err(TensorError::Shape(format!(
                "bias length {} != out channels {cout}",
                b.numel()
            )));
        }
    }
    let [n, cin, h, wd] = xd;
    let k = cout * g.kh * g.kw;
    let p = h * wd;
    let mut col = vec![T::zero(); k * p];
    let mut y = Tensor::zeros(&[n, cout, g.h, g.w]);
    let ylen = cout * g.h * g.w;
    for b in 0..n {
        let xb = &x.data()[b * cin * p..(b + 1) * cin * p];
        matmul(k, cin, p, w.data(), true, xb, false, &mut col, T::zero());
        col2im(&col, cout, &g, &mut y.data_mut()[b * ylen..(b + 1) * ylen]);
    }
    if let Some(bias) = bias {
        add_channel_bias(&mut y, bias.data());
    }
    Ok(y)
}

pub fn conv_transpose2d_backward<T: Float>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    dy: &Tensor<T>,
    opts: ConvTranspose2dOptions,
    want: [bool; 3],
) -> Result<ConvGrads<T>> {
    let xd = x.dims4()?;
    let (cout, g) = transpose_sweep(&xd, w.shape(), &opts)?;
    let [n, cin, h, wd] = xd;
    if dy.shape() != [n, cout, g.h, g.w] {
        return Err(TensorError::Shape(format!(
            "transposed conv output gradient {:?} does not match forward output",
            dy.shape()
        )));
    }
    let k = cout * g.kh * g.kw;
    let p = h * wd;
    let ylen = cout * g.h * g.w;
    let mut dcol = vec![T::zero(); k * p];
    let mut dx = want[0].then(|| Tensor::zeros(x.shape()));
    let mut dw = want[1].then(|| Tensor::zeros(w.shape()));
    if dx.is_some() || dw.is_some() {
        for b in 0..n {
            im2col(&dy.data()[b * ylen..(b + 1) * ylen], cout, &g, &mut dcol);
            if let Some(dx) = dx.as_mut() {
                let dxb = &mut dx.data_mut()[b * cin * p..(b + 1) * cin * p];
                matmul(cin, k, p, w.data(), false, &dcol, false, dxb, T::zero());
            }
            if let Some(dw) = dw.as_mut() {
                let xb = &x.data()[b * cin * p..(b + 1) * cin * p];
                matmul(cin, p, k, xb, false, &dcol, true, dw.data_mut(), T::one());
            }
        }
    }
    Ok(ConvGrads {
        x: dx,
        w: dw,
        bias: want[2].then(|| channel_sums(dy)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Textbook six-loop convolution used as the reference.
    fn naive_conv(x: &Tensor<f64>, w: &Tensor<f64>, opts: Conv2dOptions) -> Tensor<f64> {
        let [n, cin, h, wd] = x.dims4().unwrap();
        let [cout, cig, kh, kw] = w.dims4().unwrap();
        let oh = (h + 2 * opts.padding - kh) / opts.stride + 1;
        let ow = (wd + 2 * opts.padding - kw) / opts.stride + 1;
        let cog = cout / opts.groups;
        let mut y = Tensor::zeros(&[n, cout, oh, ow]);
        for b in 0..n {
            for oc in 0..cout {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut s = 0.0;
                        for icg in 0..cig {
                            let ic = (oc / cog) * cig + icg;
                            for ky in 0..kh {
                                for kx in 0..kw {
                                    let iy = (oy * opts.stride + ky) as isize - opts.padding as isize;
                                    let ix = (ox * opts.stride + kx) as isize - opts.padding as isize;
                                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                        continue;
                                    }
                                    s += w.data()[((oc * cig + icg) * kh + ky) * kw + kx]
                                        * x.data()[((b * cin + ic) * h + iy as usize) * wd + ix as usize];
                                }
                            }
                        }
                        y.data_mut()[((b * cout + oc) * oh + oy) * ow + ox] = s;
                    }
                }
            }
        }
        y
    }

    fn ramp(shape: &[usize], scale: f64) -> Tensor<f64> {
        Tensor::from_fn(shape, |i| ((i * 7919 % 97) as f64 / 97.0 - 0.5) * scale)
    }

    #[test]
    fn dense_and_grouped_match_naive() {
        let cases = [
            (Conv2dOptions::same(3), [2, 4, 5, 6], [3, 4, 3, 3]),
            (Conv2dOptions::default(), [1, 3, 4, 4], [5, 3, 1, 1]),
            (Conv2dOptions { stride: 2, padding: 1, groups: 1 }, [1, 2, 7, 5], [3, 2, 3, 3]),
            (Conv2dOptions::same(3).with_groups(4), [2, 4, 5, 5], [4, 1, 3, 3]),
            (Conv2dOptions::same(5).with_groups(2), [1, 4, 6, 6], [2, 2, 5, 5]),
        ];
        for (opts, xs, ws) in cases {
            let x = ramp(&xs, 2.0);
            let w = ramp(&ws, 1.0);
            let got = conv2d(&x, &w, None, opts).unwrap();
            let want = naive_conv(&x, &w, opts);
            assert!(got.max_abs_diff(&want).unwrap() < 1e-12, "{opts:?}");
        }
    }

    #[test]
    fn transposed_conv_doubles_and_is_adjoint() {
        let x = ramp(&[1, 3, 4, 5], 1.0);
        let w = ramp(&[3, 2, 3, 3], 1.0);
        let y = conv_transpose2d(&x, &w, None, ConvTranspose2dOptions::double()).unwrap();
        assert_eq!(y.shape(), &[1, 2, 8, 10]);
        // <T(x), v> == <x, T*(v)>; T* is the stride-2 conv whose [out, in]
        // kernel layout coincides with the transposed conv's [in, out].
        let v = ramp(&[1, 2, 8, 10], 3.0);
        let lhs: f64 = y.data().iter().zip(v.data()).map(|(a, b)| a * b).sum();
        let wt = w.clone();
        let adj = naive_conv(&v, &wt, Conv2dOptions { stride: 2, padding: 1, groups: 1 });
        let rhs: f64 = x.data().iter().zip(adj.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn rejects_channel_mismatch() {
        let x = Tensor::<f32>::zeros(&[1, 1, 8, 8]);
        let w = Tensor::<f32>::zeros(&[4, 3, 1, 1]);
        assert!(matches!(
            conv2d(&x, &w, None, Conv2dOptions::default()),
            Err(TensorError::Shape(_))
        ));
    }
}
