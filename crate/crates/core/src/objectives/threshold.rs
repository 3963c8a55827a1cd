use crate::error::{Error, Result};

/// Candidate thresholds are `i / GRID` for `i = 1 .. GRID - 1`.
pub const GRID: usize = 1024;

/// Threshold from the fixed grid maximizing pooled dice over all given
/// images, with ties resolved toward the larger threshold. A pixel is
/// positive when `score >= threshold`.
pub fn f1_threshold(images: &[(&[f64], &[bool])]) -> Result<f64> {
    // hist[i]: pixels whose score clears exactly thresholds 1..=i
    let mut pos_hist = vec![0u64; GRID];
    let mut neg_hist = vec![0u64; GRID];
    for (scores, truth) in images {
        if scores.len() != truth.len() {
            return Err(Error::Shape(format!(
                "{} scores for {} truth pixels",
                scores.len(),
                truth.len()
            )));
        }
        for (&s, &t) in scores.iter().zip(*truth) {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::Label(format!("score {s} outside [0, 1]")));
            }
            // s >= i / GRID  <=>  s * GRID >= i, exact for a power-of-two grid
            let cleared = ((s * GRID as f64).floor() as usize).min(GRID - 1);
            if t {
                pos_hist[cleared] += 1;
            } else {
                neg_hist[cleared] += 1;
            }
        }
    }
    let positives: u64 = pos_hist.iter().sum();
    let negatives: u64 = neg_hist.iter().sum();
    if positives == 0 || negatives == 0 {
        return Err(Error::Undefined(
            "threshold selection needs both positive and negative pixels".into(),
        ));
    }
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut best = (f64::NEG_INFINITY, 0usize);
    for i in (1..GRID).rev() {
        tp += pos_hist[i];
        fp += neg_hist[i];
        let fn_ = positives - tp;
        let dice = 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64;
        // descending sweep: strict improvement keeps the larger threshold
        if dice > best.0 {
            best = (dice, i);
        }
    }
    Ok(best.1 as f64 / GRID as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_scores_pick_largest_grid_point() {
        let truth = [true, false, true, false];
        let scores = [1.0, 0.0, 1.0, 0.0];
        assert_eq!(f1_threshold(&[(&scores, &truth)]).unwrap(), 1023.0 / 1024.0);
    }

    #[test]
    fn shifted_scores_split_cleanly() {
        let truth = [true, false, true, false, false];
        let scores: Vec<f64> = truth.iter().map(|&t| 0.6 * t as u8 as f64 + 0.2).collect();
        let t = f1_threshold(&[(&scores, &truth)]).unwrap();
        assert!(t > 0.2 && t <= 0.8);
        assert_eq!(t, 819.0 / 1024.0); // largest grid point not above 0.8
    }

    #[test]
    fn degenerate_truth_is_an_error() {
        assert!(f1_threshold(&[(&[0.3, 0.4], &[false, false])]).is_err());
    }
}
