use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DatasetKind {
    #[serde(rename = "DRIVE")]
    Drive,
    #[serde(rename = "STARE")]
    Stare,
    #[serde(rename = "CHASE_DB")]
    ChaseDb,
    #[serde(rename = "RITE")]
    Rite,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 4] = [Self::Drive, Self::Stare, Self::ChaseDb, Self::Rite];

    pub fn name(self) -> &'static str {
        match self {
            Self::Drive => "DRIVE",
            Self::Stare => "STARE",
            Self::ChaseDb => "CHASE_DB",
            Self::Rite => "RITE",
        }
    }

    /// Published image count.
    pub fn declared_count(self) -> usize {
        match self {
            Self::Drive | Self::Rite => 40,
            Self::Stare => 20,
            Self::ChaseDb => 28,
        }
    }

    /// Published resolution as `(height, width)`.
    pub fn declared_resolution(self) -> (u32, u32) {
        match self {
            Self::Drive | Self::Rite => (584, 565),
            Self::Stare => (605, 700),
            Self::ChaseDb => (1024, 1024),
        }
    }

    /// Classes in the ground truth, background included for RITE.
    pub fn label_classes(self) -> usize {
        match self {
            Self::Rite => 3,
            _ => 1,
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "DRIVE" => Ok(Self::Drive),
            "STARE" => Ok(Self::Stare),
            "CHASE_DB" | "CHASE_DB1" | "CHASE" => Ok(Self::ChaseDb),
            "RITE" => Ok(Self::Rite),
            _ => Err(Error::Config(format!("unknown dataset {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Test,
    /// No official split; divided downstream.
    Unsplit,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub image: PathBuf,
    pub mask: PathBuf,
    /// Field-of-view mask, when the dataset ships one.
    pub fov: Option<PathBuf>,
    pub split: SplitTag,
    pub dataset: DatasetKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub dataset: DatasetKind,
    pub entries: Vec<ManifestEntry>,
    /// `(height, width)` of the first image.
    pub native_resolution: (u32, u32),
    pub declared_count: usize,
}

impl DatasetManifest {
    pub fn split(&self, tag: SplitTag) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == tag)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut w = csv::Writer::from_path(path)?;
        for e in &self.entries {
            w.serialize(e)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path)?;
        let entries: Vec<ManifestEntry> = r.deserialize().collect::<Result<_, _>>()?;
        let first = entries
            .first()
            .ok_or_else(|| Error::Dataset(format!("{}: empty manifest", path.display())))?;
        let dataset = first.dataset;
        let (w, h) = image::image_dimensions(&first.image).map_err(|e| Error::image(&first.image, e))?;
        Ok(Self {
            dataset,
            native_resolution: (h, w),
            declared_count: dataset.declared_count(),
            entries,
        })
    }
}

fn drive_like(root: &Path, kind: DatasetKind) -> Vec<ManifestEntry> {
    let mut entries = Vec::new();
    for (dir, tag, ids) in [("training", SplitTag::Train, 21..=40), ("test", SplitTag::Test, 1..=20)] {
        for n in ids {
            let stem = format!("{n:02}_{dir}");
            let (mask, fov) = match kind {
                DatasetKind::Rite => (root.join(dir).join("av").join(format!("{stem}.png")), None),
                _ => (
                    root.join(dir).join("1st_manual").join(format!("{n:02}_manual1.gif")),
                    Some(root.join(dir).join("mask").join(format!("{stem}_mask.gif"))),
                ),
            };
            entries.push(ManifestEntry {
                id: format!("{n:02}"),
                image: root.join(dir).join("images").join(format!("{stem}.tif")),
                mask,
                fov,
                split: tag,
                dataset: kind,
            });
        }
    }
    entries
}

/// Ids of the twenty hand-labelled STARE images.
pub const STARE_IDS: [u32; 20] = [
    1, 2, 3, 4, 5, 44, 77, 81, 82, 139, 162, 163, 235, 236, 239, 240, 255, 291, 319, 324,
];

fn expected_entries(root: &Path, kind: DatasetKind) -> Vec<ManifestEntry> {
    match kind {
        DatasetKind::Drive | DatasetKind::Rite => drive_like(root, kind),
        DatasetKind::ChaseDb => (1..=14)
            .flat_map(|n| ["L", "R"].map(|eye| format!("Image_{n:02}{eye}")))
            .map(|stem| ManifestEntry {
                image: root.join(format!("{stem}.jpg")),
                mask: root.join(format!("{stem}_1stHO.png")),
                id: stem,
                fov: None,
                split: SplitTag::Unsplit,
                dataset: kind,
            })
            .collect(),
        DatasetKind::Stare => STARE_IDS
            .iter()
            .map(|n| ManifestEntry {
                id: format!("im{n:04}"),
                image: root.join("stare-images").join(format!("im{n:04}.ppm")),
                mask: root.join("labels-ah").join(format!("im{n:04}.ah.ppm")),
                fov: None,
                split: SplitTag::Unsplit,
                dataset: kind,
            })
            .collect(),
    }
}

/// Lists the image/label pairs of a dataset in its published layout.
///
/// DRIVE and RITE keep their 20/20 training/test split; STARE and CHASE_DB
/// come back unsplit. Every expected file must exist; the error lists the
/// missing ones.
pub fn discover(root: impl AsRef<Path>, kind: DatasetKind) -> Result<DatasetManifest> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::Dataset(format!("{}: not a directory", root.display())));
    }
    let entries = expected_entries(root, kind);
    let missing: Vec<String> = entries
        .iter()
        .flat_map(|e| [Some(&e.image), Some(&e.mask), e.fov.as_ref()])
        .flatten()
        .filter(|p| !p.is_file())
        .map(|p| p.strip_prefix(root).unwrap_or(p).display().to_string())
        .collect();
    if !missing.is_empty() {
        let shown = missing.iter().take(12).cloned().collect::<Vec<_>>().join(", ");
        let more = missing.len().saturating_sub(12);
        return Err(Error::Dataset(format!(
            "{kind} under {}: {} of {} expected files missing: {shown}{}",
            root.display(),
            missing.len(),
            entries.len() * 2 + entries.iter().filter(|e| e.fov.is_some()).count(),
            if more > 0 { format!(" (+{more} more)") } else { String::new() }
        )));
    }
    if entries.len() != kind.declared_count() {
        return Err(Error::Dataset(format!(
            "{kind}: {} entries, expected {}",
            entries.len(),
            kind.declared_count()
        )));
    }
    let (w, h) = image::image_dimensions(&entries[0].image).map_err(|e| Error::image(&entries[0].image, e))?;
    Ok(DatasetManifest {
        dataset: kind,
        entries,
        native_resolution: (h, w),
        declared_count: kind.declared_count(),
    })
}
