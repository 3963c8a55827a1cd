//! Runs one image through the network and prints every intermediate
//! feature map. Pass a side length to change the resolution (default 128).

use lvsnet::model::{LvsNet, Mode};
use lvsnet::tensor::{Tensor, Var};
use lvsnet::ModelConfig;

fn main() -> lvsnet::Result<()> {
    let side: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(128);
    let cfg = ModelConfig::default().with_resolution(side, side);
    let net = LvsNet::<f32>::new(&cfg)?;

    let img = Tensor::from_fn(&[1, 3, side, side], |i| (i % 251) as f32 / 251.0);
    let mut ctx = net.ctx(Mode::Eval, false, 0);
    let t = net.forward_trace(&mut ctx, &Var::constant(img))?;

    let taps = [
        ("s1", &t.taps.s1),
        ("f1", &t.f1),
        ("s2", &t.taps.s2),
        ("f2", &t.f2),
        ("s3", &t.taps.s3),
        ("f3", &t.f3),
        ("s4", &t.taps.s4),
        ("d1", &t.d1),
        ("d2", &t.d2),
        ("d3", &t.d3),
        ("d4", &t.d4),
        ("output", &t.output),
    ];
    for (name, v) in taps {
        println!("{name:>6} {:?}", v.shape());
    }
    let probs = t.output.value();
    let (lo, hi) = probs.data().iter().fold((1.0f32, 0.0f32), |(lo, hi), &p| (lo.min(p), hi.max(p)));
    println!("vessel probabilities in [{lo:.4}, {hi:.4}]");
    Ok(())
}
