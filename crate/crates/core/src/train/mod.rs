//! Training, evaluation and the ablation matrix.

mod ablation;
mod config;
mod dataset;
mod evaluate;
mod run;

pub use ablation::{run_ablation, AblationResult, AblationTable};
pub use config::{AblationRow, TrainConfig};
pub use dataset::Dataset;
pub use evaluate::{
    evaluate, evaluate_scores, fit_threshold, predict_scores, validation_dice, EvaluationReport, ImageEvaluation,
    ThresholdPolicy,
};
pub use run::{train, train_from, EpochRecord, RunRecord, TrainOutcome};
