//! Dice loss, confusion-matrix metrics, ROC/AUC and threshold selection.
//! Everything here is a pure function of its arguments.

mod dice;
mod metrics;
mod multiclass;
mod records;
mod roc;
mod threshold;

pub use dice::{dice_loss, dice_loss_grad, dice_loss_var, DiceLossParams};
pub use metrics::{confusion, metrics_from_counts, ConfusionCounts, DefaultedFlags, MetricReport};
pub use multiclass::{argmax_classes, multiclass_report, MulticlassReport, ARTERY, BACKGROUND, VEIN};
pub use records::{read_metric_csv, write_metric_csv, MetricRecord};
pub use roc::{roc_auc, RocCurve, RocOutcome, RocPoint, EXACT_SWEEP_LIMIT, QUANTILE_THRESHOLDS};
pub use threshold::{f1_threshold, GRID as THRESHOLD_GRID};

/// Binarizes scores with `score >= threshold`.
pub fn binarize(scores: &[f64], threshold: f64) -> Vec<bool> {
    scores.iter().map(|&s| s >= threshold).collect()
}
