use lvsnet_tensor::Tensor;

use crate::data::{image_tensor, mask_tensor, resize_pair, stack, SamplePair};
use crate::error::{Error, Result};

/// Pairs resampled to the network resolution, kept as 8-bit rasters and
/// converted to tensors one batch at a time.
#[derive(Clone, Debug)]
pub struct Dataset {
    pairs: Vec<SamplePair>,
    classes: usize,
    size: (u32, u32),
}

impl Dataset {
    /// `size` is `(height, width)`; `classes` is 1 for vessel/background
    /// maps and 3 for artery/vein maps.
    pub fn new(pairs: &[SamplePair], size: (u32, u32), classes: usize) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Dataset("empty dataset".into()));
        }
        let pairs = pairs
            .iter()
            .map(|p| {
                p.validate()?;
                if classes == 1 && p.max_label() > 1 {
                    return Err(Error::Config(format!("{}: multi-class labels for a 1-class model", p.id)));
                }
                Ok(resize_pair(p, size))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { pairs, classes, size })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// `(height, width)`.
    pub fn size(&self) -> (u32, u32) {
        self.size
    }

    pub fn pairs(&self) -> &[SamplePair] {
        &self.pairs
    }

    pub fn pixels(&self) -> usize {
        (self.size.0 * self.size.1) as usize
    }

    /// Images `[n, 3, h, w]` and targets `[n, classes, h, w]` for `indices`.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor<f32>, Tensor<f32>)> {
        let mut xs = Vec::with_capacity(indices.len());
        let mut ys = Vec::with_capacity(indices.len());
        for &i in indices {
            let p = &self.pairs[i];
            xs.push(image_tensor(&p.image));
            ys.push(mask_tensor(&p.mask, self.classes)?);
        }
        Ok((stack(&xs.iter().collect::<Vec<_>>())?, stack(&ys.iter().collect::<Vec<_>>())?))
    }

    /// Raw labels of one image in row-major order.
    pub fn labels(&self, i: usize) -> &[u8] {
        self.pairs[i].mask.as_raw()
    }

    /// Vessel truth of one image (any non-background label).
    pub fn truth(&self, i: usize) -> Vec<bool> {
        self.labels(i).iter().map(|&v| v > 0).collect()
    }

    /// Field-of-view membership, when the image has a field-of-view mask.
    pub fn fov(&self, i: usize) -> Option<Vec<bool>> {
        self.pairs[i].fov.as_ref().map(|f| f.pixels().map(|p| p.0[0] > 0).collect())
    }
}
