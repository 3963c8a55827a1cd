//! Command-line front end: argument parsing, the flat settings file and the
//! seven subcommands.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use image::GrayImage;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::data::{base_splits, discover, prepare_splits, write_synthetic_dataset, DataConfig, DatasetKind, SamplePair};
use crate::error::{Error, Result};
use crate::model::{audit_complexity, load_checkpoint, LvsNet};
use crate::objectives::{binarize, roc_auc, write_metric_csv, MetricRecord};
use crate::report::{audit_summary, export_roc, render_overlay, OverlayBackground, OverlaySpec};
use crate::train::{evaluate, predict_scores, run_ablation, train_from, AblationRow, Dataset, RunRecord, ThresholdPolicy, TrainConfig};

/// Every setting of a run. On disk this is one flat TOML table whose keys
/// are the field names of the model, training and data settings; a key
/// present in several of them (such as `seed`) sets all of them.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Settings {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
}

fn field_names<T: Serialize + Default>() -> Vec<String> {
    match serde_json::to_value(T::default()) {
        Ok(serde_json::Value::Object(m)) => m.keys().cloned().collect(),
        _ => Vec::new(),
    }
}

fn pick<T: Serialize + Default + for<'de> Deserialize<'de>>(table: &toml::Table) -> Result<T> {
    let names = field_names::<T>();
    let sub: toml::Table = table.iter().filter(|(k, _)| names.contains(k)).map(|(k, v)| (k.clone(), v.clone())).collect();
    sub.try_into().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))
}

impl Settings {
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.message().trim().to_string()))?;
        let mut known = field_names::<ModelConfig>();
        known.extend(field_names::<TrainConfig>());
        known.extend(field_names::<DataConfig>());
        if let Some(k) = table.keys().find(|k| !known.contains(k)) {
            return Err(Error::Config(format!("unknown setting {k:?}")));
        }
        let s = Self {
            model: pick(&table)?,
            train: pick(&table)?,
            data: pick(&table)?,
        };
        s.model.validate()?;
        s.train.validate()?;
        Ok(s)
    }

    /// `"default"` or a path to a settings file.
    pub fn load(source: &str) -> Result<Self> {
        if source == "default" {
            return Ok(Self::default());
        }
        let text = std::fs::read_to_string(source).map_err(|e| Error::io(source, e))?;
        Self::from_toml(&text)
    }

    /// The flat table form accepted by [`Settings::from_toml`].
    pub fn to_toml(&self) -> Result<String> {
        let mut table = toml::Table::new();
        for part in [
            toml::Table::try_from(&self.model),
            toml::Table::try_from(&self.train),
            toml::Table::try_from(&self.data),
        ] {
            table.extend(part.map_err(|e| Error::Config(e.to_string()))?);
        }
        toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))
    }

    fn size(&self) -> (u32, u32) {
        (self.model.input_height as u32, self.model.input_width as u32)
    }
}

/// How evaluation binarizes probabilities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThresholdArg {
    /// The threshold fitted on validation data during training.
    F1,
    Fixed(f64),
}

impl FromStr for ThresholdArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "f1" {
            return Ok(Self::F1);
        }
        let v = s
            .strip_prefix("fixed:")
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| format!("expected `f1` or `fixed:<value>`, got {s:?}"))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(format!("threshold {v} outside [0, 1]"));
        }
        Ok(Self::Fixed(v))
    }
}

#[derive(Parser, Debug)]
#[command(name = "lvsnet", version, about = "Retinal vessel segmentation: data preparation, training, evaluation and reports")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    #[arg(long)]
    pub dataset: DatasetKind,
    /// Dataset root in its published layout.
    #[arg(long)]
    pub root: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Settings file, or `default`.
    #[arg(long, default_value = "default")]
    pub config: String,
    /// Overrides every seed in the settings.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Discover a dataset, build the augmented pool and record the splits.
    Prepare {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        pool_size: Option<usize>,
        /// Comma-separated contrast gains, e.g. `0.8,1.2`.
        #[arg(long, value_delimiter = ',')]
        contrast_factors: Option<Vec<f64>>,
        /// Generate a synthetic copy of the dataset under --root first.
        #[arg(long)]
        synthetic: bool,
        /// Also write every prepared image and mask under out-dir/pool.
        #[arg(long)]
        write_pool: bool,
    },
    /// Train a model and keep the best checkpoint by validation dice.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Continue from this checkpoint instead of fresh weights.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        pool_size: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        contrast_factors: Option<Vec<f64>>,
    },
    /// Score a checkpoint on the test images.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// `f1` (threshold fitted during training) or `fixed:<value>`.
        #[arg(long, default_value = "f1")]
        threshold: ThresholdArg,
        /// Run record holding the fitted threshold; defaults to the
        /// metrics/run.json next to the checkpoint directory.
        #[arg(long)]
        run: Option<PathBuf>,
    },
    /// Train and evaluate several architecture variants on the same data.
    Ablate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated rows, e.g. `lu,mlu,full`.
        #[arg(long, value_delimiter = ',', required = true)]
        rows: Vec<AblationRow>,
    },
    /// Print parameter count, GFLOPs and serialized size.
    Audit {
        #[arg(long, default_value = "default")]
        config: String,
        /// Also list every layer.
        #[arg(long)]
        layers: bool,
    },
    /// Color a prediction against its ground truth.
    Overlay {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Source image shown dimmed under true negatives.
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long, default_value = "overlay.png")]
        out: PathBuf,
        /// Paint true negatives black.
        #[arg(long)]
        black_background: bool,
    },
    /// Export ROC curves of one or more checkpoints on the test images.
    Roc {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, required = true)]
        checkpoint: Vec<PathBuf>,
        /// One label per checkpoint; defaults to the file stems.
        #[arg(long)]
        label: Vec<String>,
    },
}

fn settings(common: &CommonArgs) -> Result<Settings> {
    let mut s = Settings::load(&common.config)?;
    if let Some(seed) = common.seed {
        s.model.seed = seed;
        s.train.seed = seed;
    }
    Ok(s)
}

fn open_gray(path: &Path) -> Result<GrayImage> {
    Ok(image::open(path).map_err(|e| Error::image(path, e))?.to_luma8())
}

fn save_png(img: &image::DynamicImage, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    img.save(path).map_err(|e| Error::image(path, e))
}

fn write_pool(dir: &Path, name: &str, pairs: &[SamplePair]) -> Result<()> {
    for p in pairs {
        save_png(&image::DynamicImage::ImageRgb8(p.image.clone()), &dir.join(name).join(format!("{}.png", p.id)))?;
        let mut m = p.mask.clone();
        let scale = if p.max_label() > 1 { 127 } else { 255 };
        m.pixels_mut().for_each(|v| v.0[0] = v.0[0].saturating_mul(scale));
        save_png(&image::DynamicImage::ImageLuma8(m), &dir.join(name).join(format!("{}_mask.png", p.id)))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SplitLine<'a> {
    id: &'a str,
    base_id: &'a str,
    split: &'a str,
}

fn prepare(data: &DataArgs, common: &CommonArgs, pool_size: Option<usize>, factors: Option<Vec<f64>>, synthetic: bool, pool: bool) -> Result<()> {
    let mut s = settings(common)?;
    if let Some(n) = pool_size {
        s.data.pool_size = n;
    }
    if let Some(f) = factors {
        s.data.contrast_factors = f;
    }
    if synthetic {
        write_synthetic_dataset(&data.root, data.dataset, None, s.train.seed)?;
        println!("wrote synthetic {} under {}", data.dataset, data.root.display());
    }
    let manifest = discover(&data.root, data.dataset)?;
    let metrics = common.out_dir.join("metrics");
    manifest.write_csv(metrics.join("manifest.csv"))?;
    let splits = prepare_splits(&manifest, &s.data, s.size(), s.train.seed)?;
    let path = metrics.join("splits.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for (name, set) in [("train", &splits.train), ("validation", &splits.validation), ("test", &splits.test)] {
        for p in set {
            w.serialize(SplitLine {
                id: &p.id,
                base_id: &p.base_id,
                split: name,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    if pool {
        let dir = common.out_dir.join("pool");
        write_pool(&dir, "train", &splits.train)?;
        write_pool(&dir, "validation", &splits.validation)?;
        write_pool(&dir, "test", &splits.test)?;
    }
    println!(
        "{}: {} entries at {}x{} (declared {}); pool train {} / validation {} / test {}",
        manifest.dataset,
        manifest.entries.len(),
        manifest.native_resolution.1,
        manifest.native_resolution.0,
        manifest.declared_count,
        splits.train.len(),
        splits.validation.len(),
        splits.test.len()
    );
    Ok(())
}

fn train_cmd(data: &DataArgs, common: &CommonArgs, resume: Option<&Path>, epochs: Option<usize>, pool_size: Option<usize>, factors: Option<Vec<f64>>) -> Result<()> {
    let mut s = settings(common)?;
    if let Some(e) = epochs {
        s.train.epochs = e;
    }
    if let Some(n) = pool_size {
        s.data.pool_size = n;
    }
    if let Some(f) = factors {
        s.data.contrast_factors = f;
    }
    let net = match resume {
        Some(path) => {
            let net = load_checkpoint::<f32>(path)?;
            s.model = net.config().clone();
            net
        }
        None => {
            if let Some(row) = s.train.ablation_row {
                s.model = row.apply(&s.model)?;
            }
            LvsNet::new(&s.model)?
        }
    };
    let manifest = discover(&data.root, data.dataset)?;
    let splits = prepare_splits(&manifest, &s.data, s.size(), s.train.seed)?;
    let classes = data.dataset.label_classes();
    let train_set = Dataset::new(&splits.train, s.size(), classes)?;
    let validation = Dataset::new(&splits.validation, s.size(), classes)?;
    std::fs::create_dir_all(&common.out_dir).map_err(|e| Error::io(&common.out_dir, e))?;
    std::fs::write(common.out_dir.join("settings.toml"), s.to_toml()?).map_err(|e| Error::io(&common.out_dir, e))?;
    println!("training on {} pairs, validating on {}", train_set.len(), validation.len());
    let outcome = train_from(net, &train_set, &validation, &s.train, Some(&common.out_dir), &mut |e| {
        println!(
            "epoch {:>4}  loss {:.5}  val dice {:.4}  threshold {}  {:.1}s",
            e.epoch,
            e.train_loss,
            e.validation_dice,
            e.threshold.map(|t| format!("{t:.4}")).unwrap_or_else(|| "-".into()),
            e.wall_seconds
        )
    })?;
    let r = &outcome.record;
    println!(
        "best epoch {} with validation dice {:.4}; checkpoint {}",
        r.best_epoch,
        r.best_validation_dice,
        r.best_checkpoint.as_deref().map(|p| p.display().to_string()).unwrap_or_default()
    );
    Ok(())
}

fn recorded_threshold(checkpoint: &Path, run: Option<&Path>) -> Result<f64> {
    let path = match run {
        Some(p) => p.to_path_buf(),
        None => checkpoint
            .parent()
            .and_then(Path::parent)
            .map(|d| d.join("metrics").join("run.json"))
            .ok_or_else(|| Error::Config("cannot locate the run record; pass --run".into()))?,
    };
    RunRecord::load(&path)?
        .best()
        .and_then(|e| e.threshold)
        .ok_or_else(|| Error::Config(format!("{}: no fitted threshold recorded", path.display())))
}

fn test_set(data: &DataArgs, s: &Settings, net: &LvsNet<f32>) -> Result<Dataset> {
    let cfg = net.config();
    let size = (cfg.input_height as u32, cfg.input_width as u32);
    let manifest = discover(&data.root, data.dataset)?;
    let (_, test) = base_splits(&manifest, &s.data, size, s.train.seed)?;
    Dataset::new(&test, size, data.dataset.label_classes())
}

fn evaluate_cmd(data: &DataArgs, common: &CommonArgs, checkpoint: &Path, threshold: ThresholdArg, run: Option<&Path>) -> Result<()> {
    let s = settings(common)?;
    let net = load_checkpoint::<f32>(checkpoint)?;
    let test = test_set(data, &s, &net)?;
    let policy = match (test.classes(), threshold) {
        (1, ThresholdArg::F1) => ThresholdPolicy::Fixed(recorded_threshold(checkpoint, run)?),
        (_, ThresholdArg::Fixed(t)) => ThresholdPolicy::Fixed(t),
        _ => ThresholdPolicy::Fixed(0.5),
    };
    let report = evaluate(&net, &test, policy, s.train.eval_batch_size)?;
    let metrics = common.out_dir.join("metrics");
    let mut rows: Vec<MetricRecord> = report.per_image.iter().map(|e| MetricRecord::new(&e.id, &e.report)).collect();
    rows.push(MetricRecord::new("mean", &report.aggregate));
    write_metric_csv(metrics.join("per_image.csv"), &rows)?;
    if let Some(fov) = &report.fov_aggregate {
        let mut rows: Vec<MetricRecord> = report
            .per_image
            .iter()
            .filter_map(|e| e.fov_report.as_ref().map(|r| MetricRecord::new(&e.id, r)))
            .collect();
        rows.push(MetricRecord::new("mean", fov));
        write_metric_csv(metrics.join("per_image_fov.csv"), &rows)?;
    }
    if let Some(roc) = &report.roc {
        export_roc(&[(data.dataset.name(), &roc.curve)], common.out_dir.join("roc"))?;
    }
    if let Some(t) = report.threshold {
        let scores = predict_scores(&net, &test, s.train.eval_batch_size)?;
        let (h, w) = test.size();
        for (i, pair) in test.pairs().iter().enumerate() {
            let pred: Vec<u8> = binarize(&scores[i], t).into_iter().map(u8::from).collect();
            let pred = GrayImage::from_raw(w, h, pred).expect("prediction size");
            let img = render_overlay(&pred, &pair.mask, Some(&pair.image), &OverlaySpec::default())?;
            save_png(&image::DynamicImage::ImageRgb8(img), &common.out_dir.join("overlays").join(format!("{}.png", pair.id)))?;
        }
    }
    let a = &report.aggregate;
    println!(
        "{} test images, threshold {}: Dice {:.4}  J {:.4}  Acc {:.4}  Sn {:.4}  Sp {:.4}  AUC {}",
        test.len(),
        report.threshold.map(|t| format!("{t:.4}")).unwrap_or_else(|| "argmax".into()),
        a.dice,
        a.jaccard,
        a.accuracy,
        a.sensitivity,
        a.specificity,
        report.roc.as_ref().and_then(|r| r.auc).map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into())
    );
    Ok(())
}

fn ablate_cmd(data: &DataArgs, common: &CommonArgs, rows: &[AblationRow]) -> Result<()> {
    let s = settings(common)?;
    let manifest = discover(&data.root, data.dataset)?;
    let splits = prepare_splits(&manifest, &s.data, s.size(), s.train.seed)?;
    let classes = data.dataset.label_classes();
    let table = run_ablation(
        rows,
        &s.model,
        &Dataset::new(&splits.train, s.size(), classes)?,
        &Dataset::new(&splits.validation, s.size(), classes)?,
        &Dataset::new(&splits.test, s.size(), classes)?,
        &s.train,
    )?;
    for w in &table.warnings {
        eprintln!("warning: {w}");
    }
    table.write_csv(common.out_dir.join("metrics").join("ablation.csv"))?;
    print!("{}", table.render());
    Ok(())
}

fn audit_cmd(config: &str, layers: bool) -> Result<()> {
    let s = Settings::load(config)?;
    let audit = audit_complexity(&s.model)?;
    if layers {
        for l in &audit.layers {
            println!("{:<28} {:>9} params {:>14} MACs  -> {}", l.name, l.params, l.macs, l.output);
        }
        println!();
    }
    print!("{}", audit_summary(&audit));
    Ok(())
}

fn overlay_cmd(pred: &Path, truth: &Path, image: Option<&Path>, out: &Path, black: bool) -> Result<()> {
    let base = image
        .map(|p| image::open(p).map(|i| i.to_rgb8()).map_err(|e| Error::image(p, e)))
        .transpose()?;
    let spec = OverlaySpec {
        background: if black { OverlayBackground::Black } else { OverlayBackground::DimmedSource },
        ..Default::default()
    };
    let img = render_overlay(&open_gray(pred)?, &open_gray(truth)?, base.as_ref(), &spec)?;
    save_png(&image::DynamicImage::ImageRgb8(img), out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn roc_cmd(data: &DataArgs, common: &CommonArgs, checkpoints: &[PathBuf], labels: &[String]) -> Result<()> {
    if !labels.is_empty() && labels.len() != checkpoints.len() {
        return Err(Error::Config(format!("{} labels for {} checkpoints", labels.len(), checkpoints.len())));
    }
    let s = settings(common)?;
    let mut curves = Vec::new();
    for (i, path) in checkpoints.iter().enumerate() {
        let net = load_checkpoint::<f32>(path)?;
        let test = test_set(data, &s, &net)?;
        if test.classes() != 1 {
            return Err(Error::Unsupported("ROC export for multi-class output".into()));
        }
        let scores: Vec<f64> = predict_scores(&net, &test, s.train.eval_batch_size)?.concat();
        let truth: Vec<bool> = (0..test.len()).flat_map(|i| test.truth(i)).collect();
        let label = labels
            .get(i)
            .cloned()
            .unwrap_or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
        curves.push((label, roc_auc(&scores, &truth, None)?));
    }
    let refs: Vec<(&str, &crate::objectives::RocCurve)> = curves.iter().map(|(l, r)| (l.as_str(), &r.curve)).collect();
    let written = export_roc(&refs, common.out_dir.join("roc"))?;
    for (label, (_, r)) in written.iter().zip(&curves) {
        println!("{label}: AUC {}", r.auc.map(|v| format!("{v:.4}")).unwrap_or_else(|| "undefined".into()));
    }
    Ok(())
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare {
            data,
            common,
            pool_size,
            contrast_factors,
            synthetic,
            write_pool,
        } => prepare(&data, &common, pool_size, contrast_factors, synthetic, write_pool),
        Command::Train {
            data,
            common,
            resume,
            epochs,
            pool_size,
            contrast_factors,
        } => train_cmd(&data, &common, resume.as_deref(), epochs, pool_size, contrast_factors),
        Command::Evaluate {
            data,
            common,
            checkpoint,
            threshold,
            run,
        } => evaluate_cmd(&data, &common, &checkpoint, threshold, run.as_deref()),
        Command::Ablate { data, common, rows } => ablate_cmd(&data, &common, &rows),
        Command::Audit { config, layers } => audit_cmd(&config, layers),
        Command::Overlay {
            pred,
            truth,
            image,
            out,
            black_background,
        } => overlay_cmd(&pred, &truth, image.as_deref(), &out, black_background),
        Command::Roc {
            data,
            common,
            checkpoint,
            label,
        } => roc_cmd(&data, &common, &checkpoint, &label),
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code: 0 on success, 1 on failure, 2 on a usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
