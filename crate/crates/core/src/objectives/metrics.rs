use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pixel outcome counts of a binary prediction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn record(&mut self, pred: bool, truth: bool) {
        match (pred, truth) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
        }
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            tn: self.tn + o.tn,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

/// Counts outcomes over pixels where `valid` (if given) is set.
pub fn confusion(pred: &[bool], truth: &[bool], valid: Option<&[bool]>) -> Result<ConfusionCounts> {
    if pred.len() != truth.len() || valid.is_some_and(|v| v.len() != pred.len()) {
        return Err(Error::Shape(format!(
            "masks of {} / {} / {:?} pixels",
            pred.len(),
            truth.len(),
            valid.map(<[bool]>::len)
        )));
    }
    let mut c = ConfusionCounts::default();
    for i in 0..pred.len() {
        if valid.is_none_or(|v| v[i]) {
            c.record(pred[i], truth[i]);
        }
    }
    Ok(c)
}

/// Metrics whose denominator vanished and were set to 1.0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefaultedFlags {
    pub dice: bool,
    pub jaccard: bool,
    pub sensitivity: bool,
    pub specificity: bool,
    pub auc: bool,
}

impl DefaultedFlags {
    pub fn any(&self) -> bool {
        self.dice || self.jaccard || self.sensitivity || self.specificity || self.auc
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub dice: f64,
    pub jaccard: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub auc: Option<f64>,
    /// Metrics reported as 1.0 because their denominator was zero
    /// ("undefined-defaulted").
    pub defaulted: DefaultedFlags,
}

fn ratio(num: u64, den: u64, flag: &mut bool) -> f64 {
    if den == 0 {
        *flag = true;
        1.0
    } else {
        num as f64 / den as f64
    }
}

pub fn metrics_from_counts(c: &ConfusionCounts) -> Result<MetricReport> {
    if c.total() == 0 {
        return Err(Error::Undefined("metrics of an empty pixel set".into()));
    }
    let mut f = DefaultedFlags::default();
    Ok(MetricReport {
        accuracy: (c.tp + c.tn) as f64 / c.total() as f64,
        dice: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_, &mut f.dice),
        jaccard: ratio(c.tp, c.tp + c.fp + c.fn_, &mut f.jaccard),
        sensitivity: ratio(c.tp, c.tp + c.fn_, &mut f.sensitivity),
        specificity: ratio(c.tn, c.tn + c.fp, &mut f.specificity),
        auc: None,
        defaulted: f,
    })
}

impl MetricReport {
    /// Arithmetic mean of each field; AUC is averaged over the reports that
    /// have one.
    pub fn mean(reports: &[MetricReport]) -> Result<MetricReport> {
        if reports.is_empty() {
            return Err(Error::Undefined("mean of zero reports".into()));
        }
        let n = reports.len() as f64;
        let avg = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        let aucs: Vec<f64> = reports.iter().filter_map(|r| r.auc).collect();
        let mut flags = DefaultedFlags::default();
        for r in reports {
            flags.dice |= r.defaulted.dice;
            flags.jaccard |= r.defaulted.jaccard;
            flags.sensitivity |= r.defaulted.sensitivity;
            flags.specificity |= r.defaulted.specificity;
            flags.auc |= r.defaulted.auc;
        }
        Ok(MetricReport {
            accuracy: avg(|r| r.accuracy),
            dice: avg(|r| r.dice),
            jaccard: avg(|r| r.jaccard),
            sensitivity: avg(|r| r.sensitivity),
            specificity: avg(|r| r.specificity),
            auc: (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64),
            defaulted: flags,
        })
    }
}
