//! Independent oracles shared by the integration tests and the acceptance
//! target. Nothing here calls the library code it is used to check.

#![allow(dead_code)]

use image::{GrayImage, RgbImage};
use lvsnet::model::{ForwardCtx, Mode};
use lvsnet::tensor::{backward, ParamKind, ParamStore, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Worst relative error found by [`fd_check`] and how many entries it
/// compared.
#[derive(Debug, Clone, Copy)]
pub struct FdReport {
    pub worst: f64,
    pub checked: usize,
}

/// Compares backprop gradients against central differences for the input
/// (every element) and for up to `per_param` elements of every trainable
/// parameter. The objective is `sum(f(x) * probe)` for a fixed random
/// probe. Relative error is measured against the larger of the two values,
/// floored at a thousandth of the tensor's largest gradient and at 1e-4 of
/// the largest gradient anywhere. The second floor matters for tensors whose
/// true gradient is exactly zero, such as a bias feeding batch norm.
pub fn fd_check(
    store: &mut ParamStore<f64>,
    input_shape: &[usize],
    seed: u64,
    per_param: usize,
    f: impl Fn(&mut ForwardCtx<f64>, &Var<f64>) -> lvsnet::Result<Var<f64>>,
) -> FdReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_tensor(input_shape, &mut rng);
    let out_shape = {
        let mut ctx = ForwardCtx::new(store, Mode::Train, false, 0);
        f(&mut ctx, &Var::constant(x.clone())).unwrap().shape().to_vec()
    };
    let probe = random_tensor(&out_shape, &mut rng);
    let objective = |store: &ParamStore<f64>, x: &Tensor<f64>| -> f64 {
        let mut ctx = ForwardCtx::new(store, Mode::Train, false, 0);
        let y = f(&mut ctx, &Var::constant(x.clone())).unwrap();
        y.value().data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
    };

    let (gx, gparams) = {
        let mut ctx = ForwardCtx::new(store, Mode::Train, true, 0);
        let xv = Var::input(x.clone());
        let y = f(&mut ctx, &xv).unwrap();
        let n = probe.numel() as f64;
        let loss = y.mul(&Var::constant(probe.clone())).unwrap().mean();
        let g = backward(&loss).unwrap();
        let gx = g.wrt(&xv).expect("input gradient").map(|v| v * n);
        let gp: Vec<_> = store
            .iter()
            .filter(|(_, e)| e.kind == ParamKind::Trainable)
            .map(|(id, e)| {
                let grad = g.param(id).map(|t| t.map(|v| v * n)).unwrap_or_else(|| Tensor::zeros(e.value.shape()));
                (id, grad)
            })
            .collect();
        (gx, gp)
    };

    let global = gparams
        .iter()
        .map(|(_, g)| g)
        .chain([&gx])
        .flat_map(|t| t.data().iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut compare = |an: f64, fd: f64, floor: f64| {
        let err = (an - fd).abs() / an.abs().max(fd.abs()).max(floor).max(1e-4 * global).max(1e-10);
        worst = worst.max(err);
        checked += 1;
    };

    let floor_x = 1e-3 * gx.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..x.numel() {
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp.data_mut()[i] += h;
        xm.data_mut()[i] -= h;
        let fd = (objective(store, &xp) - objective(store, &xm)) / (2.0 * h);
        compare(gx.data()[i], fd, floor_x);
    }
    for (id, grad) in &gparams {
        let n = grad.numel();
        let floor = 1e-3 * grad.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let picks: Vec<usize> = if n <= per_param {
            (0..n).collect()
        } else {
            (0..per_param).map(|_| rng.random_range(0..n)).collect()
        };
        for i in picks {
            let orig = store.value(*id).data()[i];
            store.value_mut(*id).data_mut()[i] = orig + h;
            let up = objective(store, &x);
            store.value_mut(*id).data_mut()[i] = orig - h;
            let down = objective(store, &x);
            store.value_mut(*id).data_mut()[i] = orig;
            compare(grad.data()[i], (up - down) / (2.0 * h), floor);
        }
    }
    FdReport { worst, checked }
}

/// Plain-loop confusion counts `(tp, tn, fp, fn)`.
pub fn confusion_loop(pred: &[bool], truth: &[bool]) -> (u64, u64, u64, u64) {
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for i in 0..pred.len() {
        if pred[i] && truth[i] {
            tp += 1;
        } else if !pred[i] && !truth[i] {
            tn += 1;
        } else if pred[i] {
            fp += 1;
        } else {
            fn_ += 1;
        }
    }
    (tp, tn, fp, fn_)
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn pairwise_auc(scores: &[f64], truth: &[bool]) -> Option<f64> {
    let pos: Vec<f64> = scores.iter().zip(truth).filter(|(_, &t)| t).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = scores.iter().zip(truth).filter(|(_, &t)| !t).map(|(&s, _)| s).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    Some(wins / (pos.len() * neg.len()) as f64)
}

/// Dice-maximizing threshold over i/1024 by exhaustive sweep, pooled over
/// all images, ties going to the larger threshold.
pub fn f1_threshold_sweep(images: &[(&[f64], &[bool])]) -> f64 {
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 1..1024 {
        let t = i as f64 / 1024.0;
        let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
        for (s, g) in images {
            for k in 0..s.len() {
                match (s[k] >= t, g[k]) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    _ => {}
                }
            }
        }
        let d = if 2 * tp + fp + fn_ == 0 {
            1.0
        } else {
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        };
        if d >= best.0 {
            best = (d, t);
        }
    }
    best.1
}

/// Four-case overlay by nested loops with the default colors.
pub fn overlay_loop(pred: &GrayImage, truth: &GrayImage, base: Option<&RgbImage>) -> RgbImage {
    let (w, h) = pred.dimensions();
    let mut out = RgbImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let p = pred.get_pixel(x, y)[0] != 0;
            let t = truth.get_pixel(x, y)[0] != 0;
            let c = if p && t {
                [0, 255, 0]
            } else if p {
                [255, 0, 0]
            } else if t {
                [0, 0, 255]
            } else if let Some(b) = base {
                let s = b.get_pixel(x, y).0;
                [s[0] / 2, s[1] / 2, s[2] / 2]
            } else {
                [0, 0, 0]
            };
            out.put_pixel(x, y, image::Rgb(c));
        }
    }
    out
}

/// Dice of two binary masks by counting.
pub fn dice_loop(pred: &[bool], truth: &[bool]) -> f64 {
    let (tp, _, fp, fn_) = confusion_loop(pred, truth);
    if 2 * tp + fp + fn_ == 0 {
        1.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}
