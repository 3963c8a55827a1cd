use serde::Serialize;

use super::metrics::{confusion, metrics_from_counts, MetricReport};
use crate::error::{Error, Result};

pub const BACKGROUND: u8 = 0;
pub const ARTERY: u8 = 1;
pub const VEIN: u8 = 2;

/// One-vs-rest reports for each class and two averages, one with and one
/// without the background class.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MulticlassReport {
    pub background: MetricReport,
    pub artery: MetricReport,
    pub vein: MetricReport,
    pub mean_with_background: MetricReport,
    pub mean_without_background: MetricReport,
}

pub fn multiclass_report(pred: &[u8], truth: &[u8]) -> Result<MulticlassReport> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "class maps of {} and {} pixels",
            pred.len(),
            truth.len()
        )));
    }
    if let Some(&bad) = pred.iter().chain(truth).find(|&&c| c > VEIN) {
        return Err(Error::Label(format!("unknown class label {bad}")));
    }
    let one_vs_rest = |class: u8| -> Result<MetricReport> {
        let p: Vec<bool> = pred.iter().map(|&c| c == class).collect();
        let t: Vec<bool> = truth.iter().map(|&c| c == class).collect();
        metrics_from_counts(&confusion(&p, &t, None)?)
    };
    let background = one_vs_rest(BACKGROUND)?;
    let artery = one_vs_rest(ARTERY)?;
    let vein = one_vs_rest(VEIN)?;
    Ok(MulticlassReport {
        mean_with_background: MetricReport::mean(&[background.clone(), artery.clone(), vein.clone()])?,
        mean_without_background: MetricReport::mean(&[artery.clone(), vein.clone()])?,
        background,
        artery,
        vein,
    })
}

/// Per-pixel argmax over `[classes, h, w]` probability planes.
pub fn argmax_classes(probs: &[f32], classes: usize) -> Vec<u8> {
    let p = probs.len() / classes;
    (0..p)
        .map(|i| {
            (0..classes)
                .max_by(|&a, &b| probs[a * p + i].total_cmp(&probs[b * p + i]).then(b.cmp(&a)))
                .unwrap_or(0) as u8
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_maps_score_one() {
        let map = [0, 1, 2, 0, 1, 2, 0, 0];
        let r = multiclass_report(&map, &map).unwrap();
        for m in [&r.background, &r.artery, &r.vein, &r.mean_with_background] {
            assert_eq!((m.dice, m.accuracy, m.sensitivity), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn swapped_vessels_zero_artery_sensitivity() {
        let truth = [0, 1, 2, 1, 2, 0];
        let pred: Vec<u8> = truth.iter().map(|&c| [0, 2, 1][c as usize]).collect();
        let r = multiclass_report(&pred, &truth).unwrap();
        assert_eq!(r.artery.sensitivity, 0.0);
        assert_eq!(r.vein.sensitivity, 0.0);
    }

    #[test]
    fn unknown_label_rejected() {
        assert!(matches!(multiclass_report(&[3], &[0]), Err(Error::Label(_))));
    }

    #[test]
    fn argmax_prefers_first_on_ties() {
        // two pixels, three classes
        let probs = [0.2, 0.5, 0.7, 0.5, 0.1, 0.0];
        assert_eq!(argmax_classes(&probs, 3), vec![1, 0]);
    }
}
