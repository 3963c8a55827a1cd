use image::{GrayImage, Luma, Rgb, RgbImage};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sample::SamplePair;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPlan {
    pub rotation_step_degrees: f64,
    /// Orientations `k * step` for `k = 0 .. rotations_per_image`.
    pub rotations_per_image: usize,
    /// Linear gains around each channel's mean, applied to the image only.
    pub contrast_factors: Vec<f64>,
    /// Larger pools are subsampled to exactly this many pairs.
    pub target_pool_size: usize,
}

impl Default for AugmentationPlan {
    fn default() -> Self {
        Self {
            rotation_step_degrees: 20.0,
            rotations_per_image: 18,
            contrast_factors: vec![0.8, 1.2],
            target_pool_size: 720,
        }
    }
}

impl AugmentationPlan {
    /// One unrotated, unadjusted copy of each of `bases` images.
    pub fn identity(bases: usize) -> Self {
        Self {
            rotation_step_degrees: 0.0,
            rotations_per_image: 1,
            contrast_factors: vec![1.0],
            target_pool_size: bases,
        }
    }

    pub fn variants_per_image(&self) -> usize {
        self.rotations_per_image * self.contrast_factors.len()
    }
}

fn bilinear(img: &RgbImage, x: f64, y: f64) -> Rgb<u8> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let (x0, y0) = (x.floor() as i64, y.floor() as i64);
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let mut acc = [0.0f64; 3];
    for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
        for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
            let (sx, sy) = (x0 + dx, y0 + dy);
            if sx < 0 || sy < 0 || sx >= w || sy >= h {
                continue; // zero fill
            }
            let p = img.get_pixel(sx as u32, sy as u32);
            for c in 0..3 {
                acc[c] += wx * wy * p.0[c] as f64;
            }
        }
    }
    Rgb(acc.map(|v| v.round().clamp(0.0, 255.0) as u8))
}

/// Inverse map of a rotation by `degrees` (counter-clockwise on screen)
/// about the image centre.
fn source_coords(w: u32, h: u32, degrees: f64) -> impl Fn(u32, u32) -> (f64, f64) {
    let (s, c) = degrees.to_radians().sin_cos();
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    move |x, y| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        (cx + c * dx - s * dy, cy + s * dx + c * dy)
    }
}

/// Rotates image (bilinear) and labels (nearest) on the same canvas,
/// filling uncovered pixels with zero.
pub fn rotate_pair(pair: &SamplePair, degrees: f64) -> SamplePair {
    if degrees.rem_euclid(360.0) == 0.0 {
        return pair.clone();
    }
    let (w, h) = pair.image.dimensions();
    let src = source_coords(w, h, degrees);
    let image = RgbImage::from_fn(w, h, |x, y| {
        let (sx, sy) = src(x, y);
        bilinear(&pair.image, sx, sy)
    });
    let nearest = |m: &GrayImage| {
        GrayImage::from_fn(w, h, |x, y| {
            let (sx, sy) = src(x, y);
            let (ix, iy) = (sx.round(), sy.round());
            if ix < 0.0 || iy < 0.0 || ix >= w as f64 || iy >= h as f64 {
                Luma([0])
            } else {
                *m.get_pixel(ix as u32, iy as u32)
            }
        })
    };
    SamplePair {
        image,
        mask: nearest(&pair.mask),
        fov: pair.fov.as_ref().map(nearest),
        ..pair.clone()
    }
}

/// `v' = mean + factor * (v - mean)` per channel, rounded and clamped.
pub fn adjust_contrast(img: &RgbImage, factor: f64) -> RgbImage {
    if factor == 1.0 {
        return img.clone();
    }
    let n = (img.width() * img.height()).max(1) as f64;
    let mut mean = [0.0f64; 3];
    for p in img.pixels() {
        for c in 0..3 {
            mean[c] += p.0[c] as f64;
        }
    }
    let mean = mean.map(|m| m / n);
    let mut out = img.clone();
    for p in out.pixels_mut() {
        for c in 0..3 {
            p.0[c] = (mean[c] + factor * (p.0[c] as f64 - mean[c])).round().clamp(0.0, 255.0) as u8;
        }
    }
    out
}

fn variant_id(base: &str, degrees: f64, factor: f64) -> String {
    format!("{base}_r{degrees:03.0}_c{factor:.2}")
}

/// Expands every base pair into all orientation/contrast variants, then
/// keeps a seed-fixed uniform subsample of `target_pool_size` if more were
/// generated. Output order follows generation order.
pub fn augment(pairs: &[SamplePair], plan: &AugmentationPlan, seed: u64) -> Result<Vec<SamplePair>> {
    if pairs.is_empty() {
        return Err(Error::Config("nothing to augment".into()));
    }
    if plan.rotations_per_image == 0 || plan.contrast_factors.is_empty() {
        return Err(Error::Config("augmentation plan generates no variants".into()));
    }
    if plan.target_pool_size < pairs.len() {
        return Err(Error::Config(format!(
            "target pool of {} is smaller than the {} base images",
            plan.target_pool_size,
            pairs.len()
        )));
    }
    let generated = pairs.len() * plan.variants_per_image();
    if generated < plan.target_pool_size {
        return Err(Error::Config(format!(
            "plan yields {generated} pairs, fewer than the target {}",
            plan.target_pool_size
        )));
    }
    let keep: Option<Vec<bool>> = (generated > plan.target_pool_size).then(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep = vec![false; generated];
        for i in sample(&mut rng, generated, plan.target_pool_size) {
            keep[i] = true;
        }
        keep
    });
    let mut pool = Vec::with_capacity(plan.target_pool_size);
    let mut index = 0;
    for pair in pairs {
        pair.validate()?;
        for k in 0..plan.rotations_per_image {
            let degrees = k as f64 * plan.rotation_step_degrees;
            let wanted: Vec<(usize, f64)> = plan
                .contrast_factors
                .iter()
                .enumerate()
                .map(|(j, &f)| (index + j, f))
                .filter(|(i, _)| keep.as_ref().is_none_or(|m| m[*i]))
                .collect();
            index += plan.contrast_factors.len();
            if wanted.is_empty() {
                continue;
            }
            let rotated = rotate_pair(pair, degrees);
            for (_, factor) in wanted {
                let mut v = rotated.clone();
                v.image = adjust_contrast(&rotated.image, factor);
                if plan.variants_per_image() > 1 {
                    v.id = variant_id(&pair.id, degrees, factor);
                }
                pool.push(v);
            }
        }
    }
    Ok(pool)
}
