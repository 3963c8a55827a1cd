use std::collections::BTreeMap;

use image::{GrayImage, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mapping from annotation colors to classes. The published artery/vein
/// rasters paint arteries red, veins blue, crossings green, uncertain
/// vessels white and background black.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiteColorTable {
    pub entries: Vec<([u8; 3], u8)>,
    /// Largest per-channel distance at which a pixel still matches a color.
    pub tolerance: u8,
}

impl Default for RiteColorTable {
    fn default() -> Self {
        Self::new(1, 0)
    }
}

impl RiteColorTable {
    /// Standard colors with configurable classes for crossings and
    /// uncertain pixels.
    pub fn new(crossing_class: u8, uncertain_class: u8) -> Self {
        Self {
            entries: vec![
                ([0, 0, 0], 0),
                ([255, 0, 0], 1),
                ([0, 0, 255], 2),
                ([0, 255, 0], crossing_class),
                ([255, 255, 255], uncertain_class),
            ],
            tolerance: 40,
        }
    }

    fn classify(&self, px: [u8; 3]) -> Option<u8> {
        self.entries
            .iter()
            .map(|(c, class)| {
                let d = (0..3).map(|i| px[i].abs_diff(c[i])).max().unwrap_or(0);
                (d, *class)
            })
            .filter(|&(d, _)| d <= self.tolerance)
            .min_by_key(|&(d, _)| d)
            .map(|(_, class)| class)
    }
}

/// Converts an artery/vein color raster to a class map in {0, 1, 2}.
pub fn encode_rite_labels(av: &RgbImage, table: &RiteColorTable) -> Result<GrayImage> {
    if let Some(&(_, bad)) = table.entries.iter().find(|(_, c)| *c > 2) {
        return Err(Error::Config(format!("color table maps to class {bad}")));
    }
    let mut unmapped: BTreeMap<[u8; 3], usize> = BTreeMap::new();
    let mut out = GrayImage::new(av.width(), av.height());
    for (o, px) in out.pixels_mut().zip(av.pixels()) {
        match table.classify(px.0) {
            Some(c) => o.0[0] = c,
            None => *unmapped.entry(px.0).or_default() += 1,
        }
    }
    if !unmapped.is_empty() {
        let listed: Vec<String> = unmapped
            .iter()
            .take(10)
            .map(|(c, n)| format!("rgb({}, {}, {}) x{n}", c[0], c[1], c[2]))
            .collect();
        return Err(Error::Label(format!(
            "{} unmapped colors: {}",
            unmapped.len(),
            listed.join(", ")
        )));
    }
    Ok(out)
}
