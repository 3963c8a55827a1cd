use std::path::Path;

use image::imageops::{self, FilterType};
use image::{GrayImage, RgbImage};
use lvsnet_tensor::Tensor;

use super::manifest::{DatasetKind, ManifestEntry};
use super::rite::{encode_rite_labels, RiteColorTable};
use crate::error::{Error, Result};

/// An RGB image with its label raster at the same size.
///
/// Binary datasets label vessels 1 and background 0; RITE uses
/// 0 = background, 1 = artery, 2 = vein.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePair {
    pub id: String,
    /// Id of the original image this sample was derived from.
    pub base_id: String,
    pub source: DatasetKind,
    pub image: RgbImage,
    pub mask: GrayImage,
    pub fov: Option<GrayImage>,
}

impl SamplePair {
    pub fn new(id: impl Into<String>, source: DatasetKind, image: RgbImage, mask: GrayImage) -> Result<Self> {
        let id = id.into();
        let pair = Self {
            base_id: id.clone(),
            id,
            source,
            image,
            mask,
            fov: None,
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn max_label(&self) -> u8 {
        match self.source {
            DatasetKind::Rite => 2,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.image.dimensions() != self.mask.dimensions() {
            return Err(Error::Shape(format!(
                "{}: image {:?} vs mask {:?}",
                self.id,
                self.image.dimensions(),
                self.mask.dimensions()
            )));
        }
        if let Some(fov) = &self.fov {
            if fov.dimensions() != self.mask.dimensions() {
                return Err(Error::Shape(format!("{}: field-of-view mask size differs", self.id)));
            }
        }
        let max = self.max_label();
        if let Some(bad) = self.mask.pixels().map(|p| p.0[0]).find(|&v| v > max) {
            return Err(Error::Label(format!(
                "{}: label {bad} outside 0..={max} for {}",
                self.id, self.source
            )));
        }
        Ok(())
    }

    /// `(height, width)`.
    pub fn size(&self) -> (u32, u32) {
        (self.image.height(), self.image.width())
    }
}

fn open(path: &Path) -> Result<image::DynamicImage> {
    image::open(path).map_err(|e| Error::image(path, e))
}

/// Reads a binary annotation stored as 0/255 (any value >= 128 is vessel).
fn read_binary(path: &Path) -> Result<GrayImage> {
    let mut g = open(path)?.to_luma8();
    for p in g.pixels_mut() {
        p.0[0] = (p.0[0] >= 128) as u8;
    }
    Ok(g)
}

/// Decodes one manifest entry into memory.
pub fn load_pair(entry: &ManifestEntry, rite_colors: &RiteColorTable) -> Result<SamplePair> {
    let img = open(&entry.image)?;
    if !matches!(img.color().channel_count(), 1 | 3 | 4) {
        return Err(Error::Dataset(format!(
            "{}: unexpected {} channels",
            entry.image.display(),
            img.color().channel_count()
        )));
    }
    let mask = match entry.dataset {
        DatasetKind::Rite => encode_rite_labels(&open(&entry.mask)?.to_rgb8(), rite_colors)?,
        _ => read_binary(&entry.mask)?,
    };
    let mut pair = SamplePair::new(entry.id.clone(), entry.dataset, img.to_rgb8(), mask)?;
    pair.fov = entry.fov.as_deref().map(read_binary).transpose()?;
    pair.validate()?;
    Ok(pair)
}

/// Image resampled bilinearly, labels and field of view by nearest
/// neighbour. A pair already at `target` comes back unchanged.
pub fn resize_pair(pair: &SamplePair, target: (u32, u32)) -> SamplePair {
    let (h, w) = target;
    if pair.size() == target {
        return pair.clone();
    }
    SamplePair {
        image: imageops::resize(&pair.image, w, h, FilterType::Triangle),
        mask: imageops::resize(&pair.mask, w, h, FilterType::Nearest),
        fov: pair.fov.as_ref().map(|f| imageops::resize(f, w, h, FilterType::Nearest)),
        ..pair.clone()
    }
}

/// Image as `[3, h, w]` floats in [0, 1].
pub fn image_tensor(img: &RgbImage) -> Tensor<f32> {
    let (w, h) = img.dimensions();
    let p = (w * h) as usize;
    let mut data = vec![0f32; 3 * p];
    for (i, px) in img.pixels().enumerate() {
        for c in 0..3 {
            data[c * p + i] = px.0[c] as f32 / 255.0;
        }
    }
    Tensor::from_vec(&[3, h as usize, w as usize], data).expect("image tensor shape")
}

/// Label raster as `[classes, h, w]` targets: a single vessel plane for
/// binary data, one-hot planes otherwise.
pub fn mask_tensor(mask: &GrayImage, classes: usize) -> Result<Tensor<f32>> {
    let (w, h) = mask.dimensions();
    let p = (w * h) as usize;
    let mut data = vec![0f32; classes * p];
    for (i, px) in mask.pixels().enumerate() {
        let label = px.0[0] as usize;
        match classes {
            1 if label <= 1 => data[i] = label as f32,
            k if k > 1 && label < k => data[label * p + i] = 1.0,
            _ => return Err(Error::Label(format!("label {label} with {classes} classes"))),
        }
    }
    Ok(Tensor::from_vec(&[classes, h as usize, w as usize], data)?)
}

/// Resizes a pair and converts it to network input and target tensors.
pub fn load_and_resize(pair: &SamplePair, target: (u32, u32), classes: usize) -> Result<(Tensor<f32>, Tensor<f32>)> {
    pair.validate()?;
    let r = resize_pair(pair, target);
    Ok((image_tensor(&r.image), mask_tensor(&r.mask, classes)?))
}

/// Stacks `[c, h, w]` tensors into one `[n, c, h, w]` batch.
pub fn stack(items: &[&Tensor<f32>]) -> Result<Tensor<f32>> {
    let first = items
        .first()
        .ok_or_else(|| Error::Shape("cannot stack an empty batch".into()))?;
    let shape = first.shape().to_vec();
    let mut data = Vec::with_capacity(items.len() * first.numel());
    for t in items {
        if t.shape() != shape.as_slice() {
            return Err(Error::Shape(format!("batch item {:?} vs {:?}", t.shape(), shape)));
        }
        data.extend_from_slice(t.data());
    }
    let mut full = vec![items.len()];
    full.extend(shape);
    Ok(Tensor::from_vec(&full, data)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{Luma, Rgb};

    fn pair(h: u32, w: u32) -> SamplePair {
        let img = RgbImage::from_fn(w, h, |x, y| Rgb([(x * 9) as u8, (y * 7) as u8, 100]));
        let mask = GrayImage::from_fn(w, h, |x, y| Luma([((x + y) % 3 == 0) as u8]));
        SamplePair::new("p", DatasetKind::Drive, img, mask).unwrap()
    }

    #[test]
    fn resize_keeps_labels_binary() {
        let r = resize_pair(&pair(29, 23), (16, 16));
        assert_eq!(r.size(), (16, 16));
        assert!(r.mask.pixels().all(|p| p.0[0] <= 1));
        let (x, y) = load_and_resize(&pair(29, 23), (16, 16), 1).unwrap();
        assert_eq!((x.shape(), y.shape()), (&[3, 16, 16][..], &[1, 16, 16][..]));
        assert!(x.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn same_size_is_identity() {
        let p = pair(16, 16);
        assert_eq!(resize_pair(&p, (16, 16)), p);
    }

    #[test]
    fn out_of_set_label_rejected() {
        let mut p = pair(4, 4);
        p.mask.put_pixel(0, 0, Luma([3]));
        assert!(matches!(p.validate(), Err(Error::Label(_))));
    }

    #[test]
    fn one_hot_planes() {
        let mask = GrayImage::from_raw(3, 1, vec![0, 1, 2]).unwrap();
        let t = mask_tensor(&mask, 3).unwrap();
        assert_eq!(t.data(), &[1., 0., 0., 0., 1., 0., 0., 0., 1.]);
        assert!(mask_tensor(&mask, 1).is_err());
    }
}
