//! File artifacts: error overlays, ROC tables and the complexity summary.

mod overlay;
mod roc_export;

pub use overlay::{render_overlay, OverlayBackground, OverlaySpec};
pub use roc_export::{disambiguate_labels, export_roc, read_roc_auc};

use crate::model::ComplexityAudit;

/// Reference complexity of the full model at 512x512: parameters in
/// millions, GFLOPs and serialized size in MiB.
pub const REFERENCE_COMPLEXITY: (f64, f64, f64) = (0.71, 29.60, 2.74);

/// Measured complexity next to the reference figures.
pub fn audit_summary(audit: &ComplexityAudit) -> String {
    let (p, g, m) = REFERENCE_COMPLEXITY;
    format!(
        "{:<12} {:>14} {:>12}\n{:<12} {:>14} {:>12}\n{:<12} {:>14} {:>12}\n{:<12} {:>14} {:>12}\n",
        "", "measured", "reference",
        "parameters", format!("{} ({:.3} M)", audit.parameter_count, audit.megaparams()), format!("{p:.2} M"),
        "GFLOPs", format!("{:.2}", audit.gflops()), format!("{g:.2}"),
        "size (MB)", format!("{:.3}", audit.megabytes()), format!("{m:.2}"),
    )
}
