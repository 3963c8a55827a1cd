use serde::Serialize;

use crate::error::{Error, Result};

/// Images up to this many pixels are swept over every distinct score.
pub const EXACT_SWEEP_LIMIT: usize = 1 << 16;
/// Threshold count for larger images, spaced by rank.
pub const QUANTILE_THRESHOLDS: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// Points ordered by decreasing threshold, from (0, 0) to (1, 1).
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    /// Trapezoidal area under the curve.
    pub fn area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RocOutcome {
    pub curve: RocCurve,
    /// `None` when the truth holds a single class, where AUC is undefined.
    pub auc: Option<f64>,
}

/// ROC sweep with a pixel predicted positive when `score >= threshold`.
///
/// Every distinct score is a threshold for up to [`EXACT_SWEEP_LIMIT`]
/// pixels; beyond that the thresholds are the scores at
/// [`QUANTILE_THRESHOLDS`] evenly spaced ranks, so the curve depends only on
/// the ordering of the scores.
pub fn roc_auc(scores: &[f64], truth: &[bool], valid: Option<&[bool]>) -> Result<RocOutcome> {
    if scores.len() != truth.len() || valid.is_some_and(|v| v.len() != scores.len()) {
        return Err(Error::Shape(format!(
            "{} scores for {} truth pixels",
            scores.len(),
            truth.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::Label(format!("score {s} outside [0, 1]")));
    }
    let mut pixels: Vec<(f64, bool)> = (0..scores.len())
        .filter(|&i| valid.is_none_or(|v| v[i]))
        .map(|i| (scores[i], truth[i]))
        .collect();
    pixels.sort_by(|a, b| b.0.total_cmp(&a.0));
    let pos = pixels.iter().filter(|p| p.1).count() as f64;
    let neg = pixels.len() as f64 - pos;
    // cumulative positives/negatives after each sorted pixel
    let mut cum = Vec::with_capacity(pixels.len());
    let (mut tp, mut fp) = (0u64, 0u64);
    for &(_, t) in &pixels {
        if t {
            tp += 1;
        } else {
            fp += 1;
        }
        cum.push((tp, fp));
    }
    let rate = |count: u64, total: f64| if total > 0.0 { count as f64 / total } else { 0.0 };
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let mut push_after = |last: usize| {
        let (tp, fp) = cum[last];
        points.push(RocPoint {
            threshold: pixels[last].0,
            fpr: rate(fp, neg),
            tpr: rate(tp, pos),
        });
    };
    let n = pixels.len();
    if n <= EXACT_SWEEP_LIMIT {
        for i in 0..n {
            if i + 1 == n || pixels[i + 1].0 != pixels[i].0 {
                push_after(i);
            }
        }
    } else {
        // ascending rank r maps to descending index n - 1 - r
        let mut last_taken = None;
        for q in (0..QUANTILE_THRESHOLDS).rev() {
            let rank = q * (n - 1) / (QUANTILE_THRESHOLDS - 1);
            let t = pixels[n - 1 - rank].0;
            // include every pixel tied at t
            let end = pixels.partition_point(|p| p.0 >= t) - 1;
            if last_taken != Some(end) {
                push_after(end);
                last_taken = Some(end);
            }
        }
    }
    let curve = RocCurve { points };
    let auc = (pos > 0.0 && neg > 0.0).then(|| curve.area());
    Ok(RocOutcome { curve, auc })
}
