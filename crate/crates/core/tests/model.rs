mod common;

use common::random_tensor;
use lvsnet::model::{audit_complexity, load_checkpoint, save_checkpoint, Fmam, LvsNet, Mode, ParamBuilder, Sfrb};
use lvsnet::tensor::{ParamKind, ParamStore, Tensor, Var};
use lvsnet::{Error, ModelConfig, SfrbConv};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn trainable_elements<T: lvsnet::tensor::Float>(store: &ParamStore<T>) -> usize {
    store
        .iter()
        .filter(|(_, e)| e.kind == ParamKind::Trainable)
        .map(|(_, e)| e.value.numel())
        .sum()
}

#[test]
fn every_intermediate_has_the_documented_shape() {
    let net = LvsNet::<f32>::new(&ModelConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = Tensor::from_fn(&[1, 3, 512, 512], |_| rng.random::<f32>());
    let mut ctx = net.ctx(Mode::Eval, false, 0);
    let t = net.forward_trace(&mut ctx, &Var::constant(x)).unwrap();
    let expect: [(&str, &Var<f32>, [usize; 3]); 12] = [
        ("s1", &t.taps.s1, [24, 512, 512]),
        ("f1", &t.f1, [48, 512, 512]),
        ("s2", &t.taps.s2, [48, 256, 256]),
        ("f2", &t.f2, [96, 256, 256]),
        ("s3", &t.taps.s3, [96, 128, 128]),
        ("f3", &t.f3, [192, 128, 128]),
        ("s4", &t.taps.s4, [192, 64, 64]),
        ("d1", &t.d1, [384, 64, 64]),
        ("d2", &t.d2, [192, 128, 128]),
        ("d3", &t.d3, [96, 256, 256]),
        ("d4", &t.d4, [48, 512, 512]),
        ("output", &t.output, [1, 512, 512]),
    ];
    for (name, v, [c, h, w]) in expect {
        assert_eq!(v.shape(), &[1, c, h, w], "{name}");
    }
    assert!(t.output.value().data().iter().all(|p| (0.0..=1.0).contains(p)));
}

#[test]
fn wrong_input_resolution_is_a_shape_error() {
    let net = LvsNet::<f32>::new(&ModelConfig::default().with_resolution(32, 32)).unwrap();
    let err = net.predict(&Tensor::zeros(&[1, 3, 40, 32])).unwrap_err();
    assert!(matches!(err, Error::Shape(_)), "{err}");
    assert!(LvsNet::<f32>::new(&ModelConfig::default().with_resolution(36, 32)).is_err());
}

#[test]
fn store_and_audit_agree_on_parameter_count() {
    for cfg in [
        ModelConfig::default(),
        ModelConfig {
            sfrb_conv: SfrbConv::Full,
            enable_fmam_skip: true,
            ..ModelConfig::default()
        },
        ModelConfig {
            multiscale_encoder: false,
            enable_sfrb_decoder: false,
            ..ModelConfig::default()
        },
    ] {
        let net = LvsNet::<f32>::new(&cfg).unwrap();
        let audit = audit_complexity(&cfg).unwrap();
        assert_eq!(trainable_elements(&net.store) as u64, audit.parameter_count);
    }
}

#[test]
fn block_parameter_counts_match_hand_formulas() {
    let c = 10;
    let mut pb = ParamBuilder::<f32>::new(0);
    Sfrb::new(&mut pb, "g", c, SfrbConv::Depthwise).unwrap();
    // conv1 9c + c, conv2 18c + c, attn c + c, three batch norms 2c each
    assert_eq!(trainable_elements(&pb.finish()), 37 * c);

    let mut pb = ParamBuilder::<f32>::new(0);
    Sfrb::new(&mut pb, "g", c, SfrbConv::Full).unwrap();
    assert_eq!(trainable_elements(&pb.finish()), 9 * c * c + c + 18 * c * c + c + c * c + c + 6 * c);

    let cfg = ModelConfig::default();
    let mut pb = ParamBuilder::<f32>::new(0);
    Fmam::new(&mut pb, "f", c, &cfg).unwrap();
    let l = cfg.focal_levels;
    let focal: usize = cfg.focal_kernel_sizes.iter().map(|k| k * k * c).sum();
    assert_eq!(trainable_elements(&pb.finish()), 4 * (c * c + c) + (c + 1) * (l + 1) + focal);
}

#[test]
fn refinement_block_with_silenced_branch_is_exact_identity() {
    for kind in [SfrbConv::Depthwise, SfrbConv::Full] {
        let mut pb = ParamBuilder::<f32>::new(9);
        let sfrb = Sfrb::new(&mut pb, "g", 6, kind).unwrap();
        let mut store = pb.finish();
        for id in [sfrb.bn2.gamma, sfrb.bn2.beta] {
            store.value_mut(id).data_mut().fill(0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::from_fn(&[2, 6, 16, 16], |_| rng.random_range(-3.0f32..3.0));
        for mode in [Mode::Train, Mode::Eval] {
            let mut ctx = lvsnet::model::ForwardCtx::new(&store, mode, false, 0);
            let y = sfrb.forward(&mut ctx, &Var::constant(x.clone())).unwrap();
            let same = y.value().data().iter().zip(x.data()).all(|(a, b)| a.to_bits() == b.to_bits());
            assert!(same, "{kind:?} {mode:?}");
        }
    }
}

#[test]
fn focal_modulation_with_closed_gates_reduces_to_projected_query() {
    let c = 5;
    let cfg = ModelConfig::default();
    let mut pb = ParamBuilder::<f64>::new(4);
    let fmam = Fmam::new(&mut pb, "f", c, &cfg).unwrap();
    let mut store = pb.finish();
    store.value_mut(fmam.gate.weight).data_mut().fill(0.0);
    store.value_mut(fmam.gate.bias.unwrap()).data_mut().fill(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (h, w) = (6, 7);
    let x = random_tensor(&[1, c, h, w], &mut rng);
    let mut ctx = lvsnet::model::ForwardCtx::eval(&store);
    let y = fmam.forward(&mut ctx, &Var::constant(x.clone())).unwrap();

    // with every gate at zero the aggregate vanishes and the modulator
    // contributes only its bias
    let wq = store.value(fmam.query.weight).data();
    let bq = store.value(fmam.query.bias.unwrap()).data();
    let bm = store.value(fmam.modulator.bias.unwrap()).data();
    let wp = store.value(fmam.proj.weight).data();
    let bp = store.value(fmam.proj.bias.unwrap()).data();
    let at = |ch: usize, p: usize| x.data()[ch * h * w + p];
    for p in 0..h * w {
        let m: Vec<f64> = (0..c)
            .map(|o| {
                let q: f64 = (0..c).map(|i| wq[o * c + i] * at(i, p)).sum::<f64>() + bq[o];
                q * bm[o]
            })
            .collect();
        for o in 0..c {
            let want: f64 = (0..c).map(|i| wp[o * c + i] * m[i]).sum::<f64>() + bp[o];
            let got = y.value().data()[o * h * w + p];
            assert!((got - want).abs() < 1e-12, "pixel {p} channel {o}: {got} vs {want}");
        }
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let cfg = ModelConfig::default().with_resolution(32, 32);
    let mut net = LvsNet::<f32>::new(&cfg).unwrap();
    // move buffers away from their initial values so they are exercised too
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ids: Vec<_> = net.store.iter().map(|(id, _)| id).collect();
    for id in ids {
        for v in net.store.value_mut(id).data_mut() {
            *v += rng.random_range(0.0f32..0.5);
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested").join("w.safetensors");
    save_checkpoint(&net, &path).unwrap();
    let back = load_checkpoint::<f32>(&path).unwrap();
    assert_eq!(back.config(), net.config());
    for ((_, a), (_, b)) in net.store.iter().zip(back.store.iter()) {
        assert_eq!(a.name, b.name);
        assert_eq!(a.kind, b.kind);
        let bits = |t: &Tensor<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.value), bits(&b.value), "{}", a.name);
    }
    let x = Tensor::from_fn(&[1, 3, 32, 32], |_| rng.random::<f32>());
    let (pa, pb) = (net.predict(&x).unwrap(), back.predict(&x).unwrap());
    assert!(pa.data().iter().zip(pb.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn damaged_checkpoints_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let missing = load_checkpoint::<f32>(dir.path().join("absent.safetensors")).unwrap_err();
    assert!(matches!(missing, Error::Io { .. }), "{missing}");
    let junk = dir.path().join("junk.safetensors");
    std::fs::write(&junk, b"not a weight file").unwrap();
    assert!(matches!(load_checkpoint::<f32>(&junk).unwrap_err(), Error::Checkpoint(_)));
}

#[test]
fn inference_is_deterministic() {
    let net = LvsNet::<f32>::new(&ModelConfig::default().with_resolution(32, 32)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = Tensor::from_fn(&[2, 3, 32, 32], |_| rng.random::<f32>());
    assert_eq!(net.predict(&x).unwrap(), net.predict(&x).unwrap());
    // dropout draws from the context seed
    let run = |seed| {
        let mut ctx = net.ctx(Mode::Train, false, seed);
        net.forward(&mut ctx, &Var::constant(x.clone())).unwrap().value().clone()
    };
    assert_eq!(run(7), run(7));
    assert_ne!(run(7), run(8));
}
