use lvsnet::data::{synth_fundus, DatasetKind, SamplePair};
use lvsnet::model::{load_checkpoint, LvsNet};
use lvsnet::tensor::ParamKind;
use lvsnet::train::{
    evaluate, evaluate_scores, predict_scores, run_ablation, train, train_from, AblationRow, Dataset, RunRecord,
    ThresholdPolicy, TrainConfig,
};
use lvsnet::{Error, ModelConfig};

const SIDE: u32 = 32;

fn data(n: u64, offset: u64) -> Dataset {
    let pairs: Vec<SamplePair> = (0..n)
        .map(|i| {
            let f = synth_fundus(SIDE, SIDE, offset + i);
            let mut p = SamplePair::new(format!("s{}", offset + i), DatasetKind::Drive, f.image.clone(), f.binary_mask()).unwrap();
            p.fov = Some(f.fov.clone());
            p
        })
        .collect();
    Dataset::new(&pairs, (SIDE, SIDE), 1).unwrap()
}

fn cfg() -> ModelConfig {
    ModelConfig {
        stage_channels: vec![4, 8, 16],
        base_channels: 4,
        ..ModelConfig::default().with_resolution(SIDE as usize, SIDE as usize)
    }
}

fn tc(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 2,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_learning_rate_leaves_weights_untouched() {
    let (tr, va) = (data(3, 0), data(1, 10));
    let net = LvsNet::<f32>::new(&cfg()).unwrap();
    let before = net.store.clone();
    let out = train_from(net, &tr, &va, &TrainConfig { learning_rate: 0.0, ..tc(2) }, None, &mut |_| {}).unwrap();
    for ((_, a), (_, b)) in before.iter().zip(out.last.store.iter()) {
        if a.kind == ParamKind::Trainable {
            assert_eq!(a.value, b.value, "{}", a.name);
        }
    }
    // running statistics still move
    assert!(before.iter().zip(out.last.store.iter()).any(|((_, a), (_, b))| a.kind == ParamKind::Buffer && a.value != b.value));
}

#[test]
fn runs_repeat_exactly_under_a_seed() {
    let (tr, va) = (data(4, 0), data(1, 10));
    for dropout_rate in [0.0, 0.5] {
        let c = ModelConfig { dropout_rate, ..cfg() };
        let a = train(&c, &tr, &va, &tc(2), None).unwrap();
        let b = train(&c, &tr, &va, &tc(2), None).unwrap();
        let losses = |r: &RunRecord| r.epochs.iter().map(|e| (e.train_loss, e.validation_dice)).collect::<Vec<_>>();
        assert_eq!(losses(&a.record), losses(&b.record));
        assert_eq!(a.last.store.iter().map(|(_, e)| e.value.clone()).collect::<Vec<_>>(),
                   b.last.store.iter().map(|(_, e)| e.value.clone()).collect::<Vec<_>>());
    }
}

#[test]
fn best_epoch_is_the_validation_maximum_and_files_are_written() {
    let (tr, va) = (data(3, 0), data(2, 10));
    let dir = tempfile::tempdir().unwrap();
    let out = train(&cfg(), &tr, &va, &TrainConfig { checkpoint_every: 2, ..tc(4) }, Some(dir.path())).unwrap();
    let r = &out.record;
    assert_eq!(r.epochs.len(), 4);
    let max = r.epochs.iter().map(|e| e.validation_dice).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(r.best_validation_dice, max);
    let first_max = r.epochs.iter().find(|e| e.validation_dice == max).unwrap();
    assert_eq!(r.best_epoch, first_max.epoch);
    assert!(r.epochs.iter().all(|e| e.threshold.is_some() && e.train_loss.is_finite()));

    let ckpt = dir.path().join("checkpoints");
    for f in ["best.safetensors", "last.safetensors", "epoch_0002.safetensors", "epoch_0004.safetensors"] {
        assert!(ckpt.join(f).is_file(), "{f}");
    }
    let saved = RunRecord::load(dir.path().join("metrics/run.json")).unwrap();
    assert_eq!(&saved, r);
    let best = load_checkpoint::<f32>(ckpt.join("best.safetensors")).unwrap();
    assert_eq!(best.store.iter().map(|(_, e)| e.value.clone()).collect::<Vec<_>>(),
               out.best.store.iter().map(|(_, e)| e.value.clone()).collect::<Vec<_>>());
}

#[test]
fn early_stop_ends_the_run() {
    let (tr, va) = (data(2, 0), data(1, 10));
    let out = train(&cfg(), &tr, &va, &TrainConfig { early_stop_dice: Some(0.0), ..tc(5) }, None).unwrap();
    assert!(out.record.stopped_early);
    assert_eq!(out.record.epochs.len(), 1);
}

#[test]
fn perfect_scores_evaluate_to_perfect_metrics() {
    let test = data(3, 20);
    let scores: Vec<Vec<f64>> = (0..test.len())
        .map(|i| test.truth(i).into_iter().map(|t| t as u8 as f64).collect())
        .collect();
    let r = evaluate_scores(&scores, &test, Some(0.5)).unwrap();
    let a = &r.aggregate;
    for v in [a.dice, a.jaccard, a.accuracy, a.sensitivity, a.specificity, a.auc.unwrap()] {
        assert_eq!(v, 1.0);
    }
    assert_eq!(r.per_image.len(), 3);
    assert!(r.fov_aggregate.is_some());
}

#[test]
fn evaluation_is_repeatable() {
    let (val, test) = (data(2, 10), data(2, 20));
    let net = LvsNet::<f32>::new(&cfg()).unwrap();
    let a = evaluate(&net, &test, ThresholdPolicy::F1(&val), 1).unwrap();
    let b = evaluate(&net, &test, ThresholdPolicy::F1(&val), 2).unwrap();
    assert_eq!(a, b);
    let fixed = evaluate(&net, &test, ThresholdPolicy::Fixed(0.5), 1).unwrap();
    assert_eq!(fixed.threshold, Some(0.5));
}

#[test]
fn resolution_mismatch_is_reported() {
    let (tr, va) = (data(2, 0), data(1, 10));
    let big = cfg().with_resolution(64, 64);
    let err = train(&big, &tr, &va, &tc(1), None).unwrap_err();
    assert!(matches!(err, Error::Shape(_)), "{err}");
    let net = LvsNet::<f32>::new(&big).unwrap();
    assert!(matches!(predict_scores(&net, &va, 1), Err(Error::Shape(_))));
}

#[test]
fn non_finite_weights_abort_with_divergence() {
    let (tr, va) = (data(2, 0), data(1, 10));
    let mut net = LvsNet::<f32>::new(&cfg()).unwrap();
    let w = net.head.conv.weight;
    net.store.value_mut(w).data_mut()[0] = f32::NAN;
    let err = train_from(net, &tr, &va, &tc(1), None, &mut |_| {}).unwrap_err();
    assert!(matches!(err, Error::Divergence(_)), "{err}");
}

#[test]
fn ablation_rows_are_checked_and_deduplicated() {
    let (tr, va, te) = (data(2, 0), data(1, 10), data(1, 20));
    assert!(matches!(run_ablation(&[], &cfg(), &tr, &va, &te, &tc(1)), Err(Error::Config(_))));
    let table = run_ablation(&[AblationRow::Lu, AblationRow::Lu, AblationRow::Full], &cfg(), &tr, &va, &te, &tc(1)).unwrap();
    assert_eq!(table.results.len(), 2);
    assert_eq!(table.warnings.len(), 1);
    let (lu, full) = (table.result(AblationRow::Lu).unwrap(), table.result(AblationRow::Full).unwrap());
    assert!(lu.parameters < full.parameters);
    let text = table.render();
    assert!(text.contains(AblationRow::Lu.title()) && text.contains(AblationRow::Full.title()));
}
