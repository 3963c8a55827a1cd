use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::MetricReport;
use crate::error::{Error, Result};

/// One CSV row: an image id (or an aggregate label) and its metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub id: String,
    #[serde(rename = "Acc")]
    pub acc: f64,
    #[serde(rename = "Dice")]
    pub dice: f64,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "Sn")]
    pub sn: f64,
    #[serde(rename = "Sp")]
    pub sp: f64,
    #[serde(rename = "AUC")]
    pub auc: Option<f64>,
}

impl MetricRecord {
    pub fn new(id: impl Into<String>, r: &MetricReport) -> Self {
        Self {
            id: id.into(),
            acc: r.accuracy,
            dice: r.dice,
            j: r.jaccard,
            sn: r.sensitivity,
            sp: r.specificity,
            auc: r.auc,
        }
    }
}

pub fn write_metric_csv(path: impl AsRef<Path>, records: &[MetricRecord]) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metric_csv(path: impl AsRef<Path>) -> Result<Vec<MetricRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}
