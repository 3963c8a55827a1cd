use image::{GrayImage, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What true-negative pixels show.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlayBackground {
    /// The source image at half brightness, or black without one.
    #[default]
    DimmedSource,
    Black,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlaySpec {
    pub tp_color: [u8; 3],
    pub fp_color: [u8; 3],
    pub fn_color: [u8; 3],
    pub background: OverlayBackground,
}

impl Default for OverlaySpec {
    fn default() -> Self {
        Self {
            tp_color: [0, 255, 0],
            fp_color: [255, 0, 0],
            fn_color: [0, 0, 255],
            background: OverlayBackground::DimmedSource,
        }
    }
}

impl OverlaySpec {
    pub fn validate(&self) -> Result<()> {
        let [a, b, c] = [self.tp_color, self.fp_color, self.fn_color];
        if a == b || b == c || a == c {
            return Err(Error::Config("overlay colors must be pairwise distinct".into()));
        }
        Ok(())
    }
}

/// Colors each pixel by its confusion outcome: true positives, false
/// positives and false negatives get the configured colors, true negatives the
/// background. Masks count any non-zero value as vessel.
pub fn render_overlay(pred: &GrayImage, truth: &GrayImage, base: Option<&RgbImage>, spec: &OverlaySpec) -> Result<RgbImage> {
    spec.validate()?;
    let dims = pred.dimensions();
    if truth.dimensions() != dims || base.is_some_and(|b| b.dimensions() != dims) {
        return Err(Error::Shape(format!(
            "overlay inputs differ in size: prediction {:?}, truth {:?}{}",
            dims,
            truth.dimensions(),
            base.map(|b| format!(", image {:?}", b.dimensions())).unwrap_or_default()
        )));
    }
    let mut out = RgbImage::new(dims.0, dims.1);
    for (x, y, px) in out.enumerate_pixels_mut() {
        let p = pred.get_pixel(x, y).0[0] > 0;
        let t = truth.get_pixel(x, y).0[0] > 0;
        *px = match (p, t) {
            (true, true) => Rgb(spec.tp_color),
            (true, false) => Rgb(spec.fp_color),
            (false, true) => Rgb(spec.fn_color),
            (false, false) => match (spec.background, base) {
                (OverlayBackground::DimmedSource, Some(b)) => Rgb(b.get_pixel(x, y).0.map(|v| v / 2)),
                _ => Rgb([0, 0, 0]),
            },
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction_has_no_error_colors() {
        let m = GrayImage::from_fn(5, 5, |x, y| image::Luma([((x + y) % 2) as u8]));
        let base = RgbImage::from_pixel(5, 5, Rgb([200, 100, 51]));
        let out = render_overlay(&m, &m, Some(&base), &OverlaySpec::default()).unwrap();
        assert!(out.pixels().all(|p| p.0 == [0, 255, 0] || p.0 == [100, 50, 25]));
    }

    #[test]
    fn all_false_positives_are_red() {
        let pred = GrayImage::from_pixel(3, 2, image::Luma([255]));
        let truth = GrayImage::new(3, 2);
        let out = render_overlay(&pred, &truth, None, &OverlaySpec::default()).unwrap();
        assert!(out.pixels().all(|p| p.0 == [255, 0, 0]));
    }

    #[test]
    fn size_mismatch_and_repeated_colors() {
        assert!(matches!(
            render_overlay(&GrayImage::new(3, 3), &GrayImage::new(3, 4), None, &OverlaySpec::default()),
            Err(Error::Shape(_))
        ));
        let spec = OverlaySpec {
            fn_color: [0, 255, 0],
            ..Default::default()
        };
        assert!(spec.validate().is_err());
    }
}
