use crate::error::{Error, Result};
use crate::model::LvsNet;
use crate::objectives::{
    argmax_classes, binarize, confusion, f1_threshold, metrics_from_counts, multiclass_report, roc_auc, MetricReport,
    MulticlassReport, RocOutcome,
};

use super::dataset::Dataset;

/// How probability maps are turned into vessel masks.
#[derive(Clone, Copy, Debug)]
pub enum ThresholdPolicy<'a> {
    Fixed(f64),
    /// Fit the dice-maximizing threshold on a reference set (normally the
    /// validation split) and apply it unchanged.
    F1(&'a Dataset),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageEvaluation {
    pub id: String,
    /// Full-frame metrics; for artery/vein data the mean over the two
    /// vessel classes.
    pub report: MetricReport,
    /// Metrics restricted to the field of view, when one is available.
    pub fov_report: Option<MetricReport>,
    pub classes: Option<MulticlassReport>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationReport {
    /// `None` for artery/vein data, which is labelled by argmax.
    pub threshold: Option<f64>,
    pub per_image: Vec<ImageEvaluation>,
    /// Per-image average.
    pub aggregate: MetricReport,
    pub fov_aggregate: Option<MetricReport>,
    /// ROC over every pixel of the set, for vessel/background data.
    pub roc: Option<RocOutcome>,
}

fn check_compatible(net: &LvsNet<f32>, data: &Dataset) -> Result<()> {
    let cfg = net.config();
    let (h, w) = data.size();
    if (cfg.input_height, cfg.input_width) != (h as usize, w as usize) {
        return Err(Error::Shape(format!(
            "data at {h}x{w} but the model expects {}x{}",
            cfg.input_height, cfg.input_width
        )));
    }
    if cfg.num_classes != data.classes() {
        return Err(Error::Config(format!(
            "model predicts {} classes, data has {}",
            cfg.num_classes,
            data.classes()
        )));
    }
    Ok(())
}

/// Eval-mode output maps, one flat `[classes * h * w]` vector per image.
pub fn predict_scores(net: &LvsNet<f32>, data: &Dataset, batch_size: usize) -> Result<Vec<Vec<f64>>> {
    check_compatible(net, data)?;
    let indices: Vec<usize> = (0..data.len()).collect();
    let mut out = Vec::with_capacity(data.len());
    for chunk in indices.chunks(batch_size.max(1)) {
        let (x, _) = data.batch(chunk)?;
        let y = net.predict(&x)?;
        let per = y.numel() / chunk.len();
        out.extend(y.data().chunks(per).map(|c| c.iter().map(|&v| v as f64).collect()));
    }
    Ok(out)
}

fn check_scores(scores: &[Vec<f64>], data: &Dataset) -> Result<()> {
    let want = data.classes() * data.pixels();
    if scores.len() != data.len() || scores.iter().any(|s| s.len() != want) {
        return Err(Error::Shape(format!(
            "{} score maps for {} images of {want} values",
            scores.len(),
            data.len()
        )));
    }
    Ok(())
}

/// Dice-maximizing threshold for a set of binary score maps.
pub fn fit_threshold(scores: &[Vec<f64>], data: &Dataset) -> Result<f64> {
    check_scores(scores, data)?;
    if data.classes() != 1 {
        return Err(Error::Unsupported("threshold fitting on multi-class output".into()));
    }
    let truths: Vec<Vec<bool>> = (0..data.len()).map(|i| data.truth(i)).collect();
    let refs: Vec<(&[f64], &[bool])> = scores.iter().zip(&truths).map(|(s, t)| (s.as_slice(), t.as_slice())).collect();
    f1_threshold(&refs)
}

fn to_f32(s: &[f64]) -> Vec<f32> {
    s.iter().map(|&v| v as f32).collect()
}

/// Metrics of precomputed score maps against `data`. `threshold` is
/// required for vessel/background data and ignored for artery/vein data.
pub fn evaluate_scores(scores: &[Vec<f64>], data: &Dataset, threshold: Option<f64>) -> Result<EvaluationReport> {
    check_scores(scores, data)?;
    let mut per_image = Vec::with_capacity(data.len());
    if data.classes() > 1 {
        for (i, s) in scores.iter().enumerate() {
            let pred = argmax_classes(&to_f32(s), data.classes());
            let classes = multiclass_report(&pred, data.labels(i))?;
            per_image.push(ImageEvaluation {
                id: data.pairs()[i].id.clone(),
                report: classes.mean_without_background.clone(),
                fov_report: None,
                classes: Some(classes),
            });
        }
        let reports: Vec<_> = per_image.iter().map(|e| e.report.clone()).collect();
        return Ok(EvaluationReport {
            threshold: None,
            aggregate: MetricReport::mean(&reports)?,
            per_image,
            fov_aggregate: None,
            roc: None,
        });
    }

    let t = threshold.ok_or_else(|| Error::Config("a threshold is required for binary evaluation".into()))?;
    let mut all_scores = Vec::with_capacity(data.len() * data.pixels());
    let mut all_truth = Vec::with_capacity(data.len() * data.pixels());
    for (i, s) in scores.iter().enumerate() {
        let truth = data.truth(i);
        let pred = binarize(s, t);
        let mut report = metrics_from_counts(&confusion(&pred, &truth, None)?)?;
        let roc = roc_auc(s, &truth, None)?;
        report.auc = roc.auc;
        report.defaulted.auc = roc.auc.is_none();
        let fov_report = match data.fov(i) {
            Some(fov) => {
                let mut r = metrics_from_counts(&confusion(&pred, &truth, Some(&fov))?)?;
                r.auc = roc_auc(s, &truth, Some(&fov))?.auc;
                Some(r)
            }
            None => None,
        };
        per_image.push(ImageEvaluation {
            id: data.pairs()[i].id.clone(),
            report,
            fov_report,
            classes: None,
        });
        all_scores.extend_from_slice(s);
        all_truth.extend(truth);
    }
    let reports: Vec<_> = per_image.iter().map(|e| e.report.clone()).collect();
    let fov_reports: Option<Vec<_>> = per_image.iter().map(|e| e.fov_report.clone()).collect();
    Ok(EvaluationReport {
        threshold: Some(t),
        aggregate: MetricReport::mean(&reports)?,
        fov_aggregate: fov_reports.map(|r| MetricReport::mean(&r)).transpose()?,
        roc: Some(roc_auc(&all_scores, &all_truth, None)?),
        per_image,
    })
}

/// Scores `test` with `net` and reports per-image and aggregate metrics.
pub fn evaluate(net: &LvsNet<f32>, test: &Dataset, policy: ThresholdPolicy<'_>, batch_size: usize) -> Result<EvaluationReport> {
    let scores = predict_scores(net, test, batch_size)?;
    let threshold = match (test.classes(), policy) {
        (k, _) if k > 1 => None,
        (_, ThresholdPolicy::Fixed(t)) => {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("threshold {t} outside [0, 1]")));
            }
            Some(t)
        }
        (_, ThresholdPolicy::F1(reference)) => Some(fit_threshold(&predict_scores(net, reference, batch_size)?, reference)?),
    };
    evaluate_scores(&scores, test, threshold)
}

/// Mean per-image dice on `data`, at the fitted threshold for binary data.
pub fn validation_dice(net: &LvsNet<f32>, data: &Dataset, batch_size: usize) -> Result<(f64, Option<f64>)> {
    let scores = predict_scores(net, data, batch_size)?;
    if data.classes() > 1 {
        return Ok((evaluate_scores(&scores, data, None)?.aggregate.dice, None));
    }
    let t = fit_threshold(&scores, data)?;
    let mut total = 0.0;
    for (i, s) in scores.iter().enumerate() {
        total += metrics_from_counts(&confusion(&binarize(s, t), &data.truth(i), None)?)?.dice;
    }
    Ok((total / data.len() as f64, Some(t)))
}
