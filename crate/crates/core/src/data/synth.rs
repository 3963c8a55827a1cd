//! Procedural fundus-like images with exact vessel labels, laid out on disk
//! like the published datasets so the loaders can be exercised without the
//! licensed originals.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, Luma, Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::manifest::{DatasetKind, STARE_IDS};
use crate::error::{Error, Result};

/// One generated image: the RGB photograph, a class map (0 background,
/// 1 artery, 2 vein) and the circular field of view.
#[derive(Clone, Debug)]
pub struct SyntheticFundus {
    pub image: RgbImage,
    pub classes: GrayImage,
    pub fov: GrayImage,
}

impl SyntheticFundus {
    /// Vessel map with arteries and veins merged, values in {0, 1}.
    pub fn binary_mask(&self) -> GrayImage {
        let mut m = self.classes.clone();
        for p in m.pixels_mut() {
            p.0[0] = (p.0[0] > 0) as u8;
        }
        m
    }

    /// Class map painted in the artery/vein color convention.
    pub fn av_raster(&self) -> RgbImage {
        RgbImage::from_fn(self.classes.width(), self.classes.height(), |x, y| {
            match self.classes.get_pixel(x, y).0[0] {
                1 => Rgb([255, 0, 0]),
                2 => Rgb([0, 0, 255]),
                _ => Rgb([0, 0, 0]),
            }
        })
    }
}

struct Segment {
    a: (f64, f64),
    b: (f64, f64),
    radius: f64,
    class: u8,
}

fn grow(rng: &mut ChaCha8Rng, segs: &mut Vec<Segment>, start: (f64, f64), angle: f64, radius: f64, class: u8, step: f64, depth: u32) {
    let (mut p, mut theta, mut r) = (start, angle, radius);
    let steps = rng.random_range(14..24);
    for i in 0..steps {
        theta += rng.random_range(-0.25..0.25);
        let q = (p.0 + step * theta.cos(), p.1 + step * theta.sin());
        segs.push(Segment { a: p, b: q, radius: r, class });
        p = q;
        r = (r * 0.97).max(0.8);
        if depth < 3 && i > 2 && rng.random_bool(0.12) {
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let off = theta + side * rng.random_range(0.5..1.0);
            grow(rng, segs, p, off, r * 0.7, class, step * 0.85, depth + 1);
        }
    }
}

fn segment_distance(p: (f64, f64), s: &Segment) -> f64 {
    let (dx, dy) = (s.b.0 - s.a.0, s.b.1 - s.a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - s.a.0) * dx + (p.1 - s.a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (s.a.0 + t * dx - p.0, s.a.1 + t * dy - p.1);
    (cx * cx + cy * cy).sqrt()
}

/// Generates a `(height, width)` image. The same seed always gives the same
/// picture.
pub fn synth_fundus(height: u32, width: u32, seed: u64) -> SyntheticFundus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width as f64, height as f64);
    let (cx, cy) = ((w - 1.0) / 2.0, (h - 1.0) / 2.0);
    let fov_r = 0.47 * w.min(h);
    let disc_angle = rng.random_range(-0.3..0.3) + if rng.random_bool(0.5) { 0.0 } else { PI };
    let disc = (cx + 0.45 * fov_r * disc_angle.cos(), cy + 0.45 * fov_r * disc_angle.sin());
    let disc_r = 0.09 * fov_r;
    let scale = w.min(h) / 512.0;

    let mut segs = Vec::new();
    let trunks = rng.random_range(6..9);
    for k in 0..trunks {
        let angle = TAU * (k as f64 + rng.random_range(0.0..0.6)) / trunks as f64;
        let class = 1 + (k % 2) as u8;
        let radius = scale * rng.random_range(3.0..4.5) * if class == 2 { 1.2 } else { 1.0 };
        grow(&mut rng, &mut segs, disc, angle, radius, class, 18.0 * scale, 0);
    }

    let mut classes = GrayImage::new(width, height);
    for s in &segs {
        let pad = s.radius + 1.0;
        let x0 = (s.a.0.min(s.b.0) - pad).floor().max(0.0) as u32;
        let x1 = (s.a.0.max(s.b.0) + pad).ceil().min(w - 1.0).max(0.0) as u32;
        let y0 = (s.a.1.min(s.b.1) - pad).floor().max(0.0) as u32;
        let y1 = (s.a.1.max(s.b.1) + pad).ceil().min(h - 1.0).max(0.0) as u32;
        for y in y0..=y1 {
            for x in x0..=x1 {
                if segment_distance((x as f64, y as f64), s) <= s.radius {
                    let px = classes.get_pixel_mut(x, y);
                    // veins are drawn over arteries where they cross
                    px.0[0] = px.0[0].max(s.class);
                }
            }
        }
    }

    let tint = [rng.random_range(170.0..215.0), rng.random_range(70.0..100.0), rng.random_range(25.0..50.0)];
    let mut fov = GrayImage::new(width, height);
    let mut image = RgbImage::new(width, height);
    for y in 0..height {
        for x in 0..width {
            let (fx, fy) = (x as f64, y as f64);
            let rr = ((fx - cx).powi(2) + (fy - cy).powi(2)).sqrt() / fov_r;
            if rr > 1.0 {
                classes.put_pixel(x, y, Luma([0]));
                continue;
            }
            fov.put_pixel(x, y, Luma([255]));
            let vignette = 1.0 - 0.35 * rr * rr;
            let dd = ((fx - disc.0).powi(2) + (fy - disc.1).powi(2)).sqrt() / disc_r;
            let glow = 1.0 + 0.6 * (-dd * dd).exp();
            let vessel = match classes.get_pixel(x, y).0[0] {
                1 => [0.72, 0.55, 0.7],
                2 => [0.55, 0.42, 0.6],
                _ => [1.0; 3],
            };
            let mut c = [0u8; 3];
            for i in 0..3 {
                let v = tint[i] * vignette * glow * vessel[i] + rng.random_range(-6.0..6.0);
                c[i] = v.round().clamp(0.0, 255.0) as u8;
            }
            image.put_pixel(x, y, Rgb(c));
        }
    }
    SyntheticFundus { image, classes, fov }
}

fn save(img: DynamicImage, path: &Path, format: ImageFormat) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    // the GIF encoder only takes RGBA
    let img = match format {
        ImageFormat::Gif => DynamicImage::ImageRgba8(img.to_rgba8()),
        _ => img,
    };
    img.save_with_format(path, format).map_err(|e| Error::image(path, e))
}

fn scale_binary(mask: &GrayImage) -> DynamicImage {
    let mut m = mask.clone();
    for p in m.pixels_mut() {
        p.0[0] = if p.0[0] > 0 { 255 } else { 0 };
    }
    DynamicImage::ImageLuma8(m)
}

/// Writes a complete synthetic copy of `kind` under `root` in the published
/// directory layout and file formats. `size` overrides the native
/// `(height, width)`; the image count always matches the real dataset.
pub fn write_synthetic_dataset(root: impl AsRef<Path>, kind: DatasetKind, size: Option<(u32, u32)>, seed: u64) -> Result<()> {
    let root = root.as_ref();
    let (h, w) = size.unwrap_or(kind.declared_resolution());
    let gen = |i: u64| synth_fundus(h, w, seed.wrapping_mul(1_000_003).wrapping_add(i));
    match kind {
        DatasetKind::Drive | DatasetKind::Rite => {
            for n in 1..=40u32 {
                let dir = root.join(if n > 20 { "training" } else { "test" });
                let stem = format!("{n:02}_{}", if n > 20 { "training" } else { "test" });
                let f = gen(n as u64);
                save(DynamicImage::ImageRgb8(f.image.clone()), &dir.join("images").join(format!("{stem}.tif")), ImageFormat::Tiff)?;
                if kind == DatasetKind::Rite {
                    save(DynamicImage::ImageRgb8(f.av_raster()), &dir.join("av").join(format!("{stem}.png")), ImageFormat::Png)?;
                } else {
                    let manual = dir.join("1st_manual").join(format!("{n:02}_manual1.gif"));
                    save(scale_binary(&f.binary_mask()), &manual, ImageFormat::Gif)?;
                    let mask = dir.join("mask").join(format!("{stem}_mask.gif"));
                    save(DynamicImage::ImageLuma8(f.fov.clone()), &mask, ImageFormat::Gif)?;
                }
            }
        }
        DatasetKind::ChaseDb => {
            for n in 1..=14u32 {
                for (e, eye) in ["L", "R"].iter().enumerate() {
                    let stem = format!("Image_{n:02}{eye}");
                    let f = gen((2 * n + e as u32) as u64);
                    save(DynamicImage::ImageRgb8(f.image.clone()), &root.join(format!("{stem}.jpg")), ImageFormat::Jpeg)?;
                    save(scale_binary(&f.binary_mask()), &root.join(format!("{stem}_1stHO.png")), ImageFormat::Png)?;
                }
            }
        }
        DatasetKind::Stare => {
            for &n in &STARE_IDS {
                let f = gen(n as u64);
                let stem = format!("im{n:04}");
                save(DynamicImage::ImageRgb8(f.image.clone()), &root.join("stare-images").join(format!("{stem}.ppm")), ImageFormat::Pnm)?;
                let label = scale_binary(&f.binary_mask()).to_rgb8();
                save(DynamicImage::ImageRgb8(label), &root.join("labels-ah").join(format!("{stem}.ah.ppm")), ImageFormat::Pnm)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_labelled() {
        let a = synth_fundus(64, 60, 5);
        let b = synth_fundus(64, 60, 5);
        assert_eq!(a.image, b.image);
        assert_eq!(a.classes, b.classes);
        let vessel = a.classes.pixels().filter(|p| p.0[0] > 0).count();
        let total = (64 * 60) as f64;
        assert!(vessel as f64 > 0.03 * total && (vessel as f64) < 0.4 * total, "{vessel}");
        assert!(a.classes.pixels().all(|p| p.0[0] <= 2));
    }

    #[test]
    fn av_raster_round_trips_through_color_table() {
        let f = synth_fundus(48, 48, 2);
        let back = super::super::encode_rite_labels(&f.av_raster(), &Default::default()).unwrap();
        assert_eq!(back, f.classes);
    }
}
