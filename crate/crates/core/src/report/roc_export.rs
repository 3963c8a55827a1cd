use std::collections::HashMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::objectives::RocCurve;

/// Labels made unique by appending `-2`, `-3`, ... to repeats.
pub fn disambiguate_labels<'a>(labels: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let labels: Vec<&str> = labels.into_iter().collect();
    let mut taken: std::collections::HashSet<String> = labels.iter().map(|l| l.to_string()).collect();
    let mut seen: HashMap<&str, usize> = HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let n = seen.entry(l).or_insert(0);
            *n += 1;
            if *n == 1 {
                return l.to_string();
            }
            let mut k = *n;
            loop {
                let candidate = format!("{l}-{k}");
                if taken.insert(candidate.clone()) {
                    return candidate;
                }
                k += 1;
            }
        })
        .collect()
}

#[derive(Serialize)]
struct PointLine<'a> {
    label: &'a str,
    threshold: f64,
    fpr: f64,
    tpr: f64,
}

#[derive(Serialize)]
struct AucLine<'a> {
    label: &'a str,
    auc: f64,
    points: usize,
}

/// Writes `roc_points.csv` (label, threshold, fpr, tpr) and `roc_auc.csv`
/// (label, trapezoidal AUC, point count) under `dir`. Returns the labels as
/// written.
pub fn export_roc(curves: &[(&str, &RocCurve)], dir: impl AsRef<Path>) -> Result<Vec<String>> {
    if curves.is_empty() {
        return Err(Error::Config("no ROC curves to export".into()));
    }
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let labels = disambiguate_labels(curves.iter().map(|(l, _)| *l));
    let mut points = csv::Writer::from_path(dir.join("roc_points.csv"))?;
    let mut aucs = csv::Writer::from_path(dir.join("roc_auc.csv"))?;
    for (label, (_, curve)) in labels.iter().zip(curves) {
        for p in &curve.points {
            points.serialize(PointLine {
                label,
                threshold: p.threshold,
                fpr: p.fpr,
                tpr: p.tpr,
            })?;
        }
        aucs.serialize(AucLine {
            label,
            auc: curve.area(),
            points: curve.points.len(),
        })?;
    }
    points.flush().map_err(|e| Error::io(dir, e))?;
    aucs.flush().map_err(|e| Error::io(dir, e))?;
    Ok(labels)
}

/// Reads back the per-label AUC table written by [`export_roc`].
pub fn read_roc_auc(dir: impl AsRef<Path>) -> Result<Vec<(String, f64)>> {
    let mut r = csv::Reader::from_path(dir.as_ref().join("roc_auc.csv"))?;
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let auc = row
            .get(1)
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| Error::Config(format!("bad AUC row {row:?}")))?;
        out.push((row.get(0).unwrap_or_default().to_string(), auc));
    }
    Ok(out)
}
