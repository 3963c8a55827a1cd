use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::objectives::MetricReport;

use super::config::{AblationRow, TrainConfig};
use super::dataset::Dataset;
use super::evaluate::{evaluate, ThresholdPolicy};
use super::run::{train, RunRecord};

#[derive(Clone, Debug, Serialize)]
pub struct AblationResult {
    pub row: AblationRow,
    pub report: MetricReport,
    pub threshold: Option<f64>,
    pub parameters: usize,
    #[serde(skip)]
    pub run: RunRecord,
}

#[derive(Clone, Debug, Serialize)]
pub struct AblationTable {
    pub results: Vec<AblationResult>,
    /// Notes about the requested row list, such as dropped duplicates.
    pub warnings: Vec<String>,
}

impl AblationTable {
    pub fn result(&self, row: AblationRow) -> Option<&AblationResult> {
        self.results.iter().find(|r| r.row == row)
    }

    /// Text table with Dice, J, Acc, Sen and Sp in percent.
    pub fn render(&self) -> String {
        let width = self.results.iter().map(|r| r.row.title().len()).max().unwrap_or(6).max(6);
        let mut s = String::new();
        let _ = writeln!(s, "{:<width$} | {:>6} | {:>6} | {:>6} | {:>6} | {:>6}", "Method", "Dice", "J", "Acc", "Sen", "Sp");
        let _ = writeln!(s, "{}", "-".repeat(width + 45));
        for r in &self.results {
            let m = &r.report;
            let _ = writeln!(
                s,
                "{:<width$} | {:>6.2} | {:>6.2} | {:>6.2} | {:>6.2} | {:>6.2}",
                r.row.title(),
                100.0 * m.dice,
                100.0 * m.jaccard,
                100.0 * m.accuracy,
                100.0 * m.sensitivity,
                100.0 * m.specificity
            );
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            row: &'a str,
            method: &'a str,
            #[serde(rename = "Dice")]
            dice: f64,
            #[serde(rename = "J")]
            j: f64,
            #[serde(rename = "Acc")]
            acc: f64,
            #[serde(rename = "Sen")]
            sen: f64,
            #[serde(rename = "Sp")]
            sp: f64,
            threshold: Option<f64>,
            parameters: usize,
        }
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.results {
            w.serialize(Line {
                row: r.row.key(),
                method: r.row.title(),
                dice: r.report.dice,
                j: r.report.jaccard,
                acc: r.report.accuracy,
                sen: r.report.sensitivity,
                sp: r.report.specificity,
                threshold: r.threshold,
                parameters: r.parameters,
            })?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Trains and evaluates each row under the same seed and data. The test
/// threshold is fitted on `validation`. Duplicate rows are dropped with a
/// warning; every row is checked before any training starts.
pub fn run_ablation(
    rows: &[AblationRow],
    base: &ModelConfig,
    train_set: &Dataset,
    validation: &Dataset,
    test: &Dataset,
    tc: &TrainConfig,
) -> Result<AblationTable> {
    if rows.is_empty() {
        return Err(Error::Config("no ablation rows requested".into()));
    }
    let mut warnings = Vec::new();
    let mut unique: Vec<AblationRow> = Vec::new();
    for &row in rows {
        if unique.contains(&row) {
            warnings.push(format!("duplicate ablation row {row} ignored"));
        } else {
            unique.push(row);
        }
    }
    let configs = unique
        .iter()
        .map(|r| r.apply(base))
        .collect::<Result<Vec<_>>>()?;
    let mut results = Vec::with_capacity(unique.len());
    for (row, cfg) in unique.into_iter().zip(configs) {
        let run_tc = TrainConfig {
            ablation_row: None,
            ..tc.clone()
        };
        let outcome = train(&cfg, train_set, validation, &run_tc, None)?;
        let eval = evaluate(&outcome.best, test, ThresholdPolicy::F1(validation), tc.eval_batch_size)?;
        results.push(AblationResult {
            row,
            report: eval.aggregate,
            threshold: eval.threshold,
            parameters: outcome.best.store.trainable_count(),
            run: outcome.record,
        });
    }
    Ok(AblationTable { results, warnings })
}
