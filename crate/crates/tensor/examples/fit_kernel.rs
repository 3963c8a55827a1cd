//! Compares one analytic gradient with a central difference, then recovers
//! a hidden 3x3 edge kernel by gradient descent.

use lvsnet_tensor::{backward, Adam, Conv2dOptions, ParamKind, ParamStore, Tensor, Var};

const SOBEL: [f64; 9] = [-1.0, 0.0, 1.0, -2.0, 0.0, 2.0, -1.0, 0.0, 1.0];

fn loss(store: &ParamStore<f64>, w: lvsnet_tensor::ParamId, x: &Tensor<f64>, target: &Tensor<f64>) -> lvsnet_tensor::Result<Var<f64>> {
    let opts = Conv2dOptions { padding: 1, ..Default::default() };
    let y = Var::constant(x.clone()).conv2d(&store.var(w, true), None, opts)?;
    let diff = y.add(&Var::constant(target.map(|t| -t)))?;
    Ok(diff.mul(&diff)?.mean())
}

fn main() -> lvsnet_tensor::Result<()> {
    let x = Tensor::from_fn(&[4, 1, 16, 16], |i| ((i * 7919) % 101) as f64 / 101.0);
    let sobel = Tensor::from_vec(&[1, 1, 3, 3], SOBEL.to_vec())?;
    let target = lvsnet_tensor::kernels::conv::conv2d(&x, &sobel, None, Conv2dOptions { padding: 1, ..Default::default() })?;

    let mut store = ParamStore::new();
    let w = store.insert("w", ParamKind::Trainable, Tensor::zeros(&[1, 1, 3, 3]))?;
    let g = backward(&loss(&store, w, &x, &target)?)?;
    let analytic = g.param(w).map(|t| t.data()[0]).unwrap_or(0.0);
    let h = 1e-6;
    let mut at = |delta: f64| -> lvsnet_tensor::Result<f64> {
        store.value_mut(w).data_mut()[0] += delta;
        let v = loss(&store, w, &x, &target)?.value().data()[0];
        store.value_mut(w).data_mut()[0] -= delta;
        Ok(v)
    };
    let numeric = (at(h)? - at(-h)?) / (2.0 * h);
    println!("corner tap gradient: analytic {analytic:.6e}, central difference {numeric:.6e}");
    let mut opt = Adam::new(0.05);
    for step in 0..=400 {
        let l = loss(&store, w, &x, &target)?;
        if step % 100 == 0 {
            println!("step {step:>3}  loss {:.3e}", l.value().data()[0]);
        }
        let g = backward(&l)?;
        opt.step(&mut store, &g);
    }
    let learned: Vec<String> = store.value(w).data().iter().map(|v| format!("{v:+.3}")).collect();
    println!("learned kernel {}", learned.join(" "));

    Ok(())
}
