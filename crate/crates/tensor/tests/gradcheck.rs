use lvsnet_tensor::{backward, Conv2dOptions, ConvTranspose2dOptions, Result, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Checks backward gradients of `f` against central differences, for every
/// input. The scalar objective is `sum(f(inputs) * probe)` with a fixed
/// random probe so that no output element is weighted trivially.
fn check(shapes: &[&[usize]], seed: u64, f: impl Fn(&[Var<f64>]) -> Result<Var<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<_> = shapes.iter().map(|s| random(s, &mut rng)).collect();
    let out_shape = {
        let vars: Vec<_> = values.iter().cloned().map(Var::constant).collect();
        f(&vars).unwrap().shape().to_vec()
    };
    let probe = Var::constant(random(&out_shape, &mut rng));
    let objective = |vals: &[Tensor<f64>]| -> f64 {
        let vars: Vec<_> = vals.iter().cloned().map(Var::constant).collect();
        let y = f(&vars).unwrap();
        y.value().data().iter().zip(probe.value().data()).map(|(a, b)| a * b).sum()
    };
    let vars: Vec<_> = values.iter().cloned().map(Var::input).collect();
    let loss = f(&vars).unwrap().mul(&probe).unwrap().mean();
    let grads = backward(&loss).unwrap();
    let scale = out_shape.iter().product::<usize>() as f64;
    let h = 1e-6;
    for (k, v) in vars.iter().enumerate() {
        let g = grads.wrt(v).expect("gradient for every input");
        for i in 0..values[k].numel() {
            let mut plus = values.clone();
            plus[k].data_mut()[i] += h;
            let mut minus = values.clone();
            minus[k].data_mut()[i] -= h;
            let fd = (objective(&plus) - objective(&minus)) / (2.0 * h) / scale;
            let an = g.data()[i];
            let err = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
            assert!(err < 1e-5, "input {k} element {i}: analytic {an} vs numeric {fd}");
        }
    }
}

#[test]
fn conv2d_dense_strided_and_grouped() {
    check(&[&[2, 3, 5, 5], &[4, 3, 3, 3], &[4]], 1, |v| {
        v[0].conv2d(&v[1], Some(&v[2]), Conv2dOptions::same(3))
    });
    check(&[&[1, 2, 6, 5], &[3, 2, 3, 3]], 2, |v| {
        v[0].conv2d(&v[1], None, Conv2dOptions { stride: 2, padding: 1, groups: 1 })
    });
    check(&[&[1, 4, 5, 5], &[4, 1, 5, 5], &[4]], 3, |v| {
        v[0].conv2d(&v[1], Some(&v[2]), Conv2dOptions::same(5).with_groups(4))
    });
    check(&[&[2, 3, 4, 4], &[5, 3, 1, 1]], 4, |v| v[0].conv2d(&v[1], None, Conv2dOptions::default()));
}

#[test]
fn conv_transpose2d() {
    check(&[&[2, 3, 3, 4], &[3, 2, 3, 3], &[2]], 5, |v| {
        v[0].conv_transpose2d(&v[1], Some(&v[2]), ConvTranspose2dOptions::double())
    });
}

#[test]
fn batch_norm_both_modes() {
    check(&[&[2, 3, 3, 3], &[3], &[3]], 6, |v| {
        Ok(v[0].batch_norm(&v[1], &v[2], None, 1e-5)?.0)
    });
    let rm = Tensor::from_vec(&[3], vec![0.1, -0.2, 0.3]).unwrap();
    let rv = Tensor::from_vec(&[3], vec![0.5, 1.5, 2.0]).unwrap();
    check(&[&[1, 3, 3, 3], &[3], &[3]], 7, |v| {
        Ok(v[0].batch_norm(&v[1], &v[2], Some((&rm, &rv)), 1e-5)?.0)
    });
}

#[test]
fn activations() {
    check(&[&[1, 2, 3, 3]], 8, |v| Ok(v[0].relu()));
    check(&[&[1, 2, 3, 3]], 9, |v| Ok(v[0].gelu()));
    check(&[&[1, 2, 3, 3]], 10, |v| Ok(v[0].sigmoid()));
}

#[test]
fn pooling() {
    check(&[&[2, 2, 4, 6]], 11, |v| v[0].max_pool_2x2());
    check(&[&[1, 2, 5, 4]], 12, |v| v[0].max_pool_3x3_same());
    check(&[&[1, 2, 5, 4]], 13, |v| v[0].avg_pool_3x3_same());
    check(&[&[2, 3, 4, 5]], 14, |v| v[0].global_avg_pool());
}

#[test]
fn broadcasting_and_channel_plumbing() {
    check(&[&[2, 3, 4, 4], &[2, 3, 1, 1]], 15, |v| v[0].mul(&v[1]));
    check(&[&[2, 1, 4, 4], &[2, 3, 1, 1]], 16, |v| v[0].mul(&v[1]));
    check(&[&[1, 3, 4, 4], &[1, 3, 4, 4]], 17, |v| v[0].add(&v[1]));
    check(&[&[2, 2, 3, 3], &[2, 3, 3, 3]], 18, |v| Var::concat_channels(&[&v[0], &v[1]]));
    check(&[&[2, 5, 3, 3]], 19, |v| v[0].narrow_channels(1, 3));
    check(&[&[2, 2, 3, 3], &[2, 2, 3, 3]], 20, |v| v[0].interleave_channels(&v[1]));
}

#[test]
fn shared_subexpressions_accumulate() {
    // y = x * x + relu(x) uses x three times.
    check(&[&[1, 2, 3, 3]], 21, |v| v[0].mul(&v[0])?.add(&v[0].relu()));
}

#[test]
fn dropout_mask_is_differentiated_through() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = Var::input(Tensor::<f64>::full(&[1, 1, 8, 8], 2.0));
    let y = x.dropout(0.5, &mut rng).unwrap();
    let g = backward(&y.mean()).unwrap();
    let gx = g.wrt(&x).unwrap();
    for (&yv, &gv) in y.value().data().iter().zip(gx.data()) {
        // survivors are scaled by 2, so y = 4 and dy/dx = 2 there, 0 elsewhere
        assert_eq!(gv * 64.0, yv / 2.0);
    }
    let same = x.dropout(0.0, &mut rng).unwrap();
    assert_eq!(same.value(), x.value());
}

#[test]
fn constants_record_no_graph() {
    let x = Var::constant(Tensor::<f32>::full(&[1, 1, 2, 2], 1.0));
    let y = x.relu().mean();
    assert!(!y.requires_grad());
    let g = backward(&y).unwrap();
    assert!(g.wrt(&x).is_none());
}

#[test]
fn activations_propagate_nan() {
    let x = Var::constant(Tensor::from_vec(&[3], vec![f64::NAN, -1.0, 2.0]).unwrap());
    for y in [x.relu(), x.gelu(), x.sigmoid()] {
        assert!(y.value().data()[0].is_nan());
    }
    assert_eq!(&x.relu().value().data()[1..], &[0.0, 2.0]);
}
