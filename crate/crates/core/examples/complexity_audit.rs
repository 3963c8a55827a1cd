//! Parameter, FLOP and size audit for the default network and two narrower
//! variants.

use lvsnet::model::audit_complexity;
use lvsnet::report::audit_summary;
use lvsnet::ModelConfig;

fn main() -> lvsnet::Result<()> {
    let default = ModelConfig::default();
    println!("{}", audit_summary(&audit_complexity(&default)?));

    for base in [8, 16] {
        let cfg = ModelConfig {
            base_channels: base,
            stage_channels: vec![base, 2 * base, 4 * base],
            ..default.clone()
        };
        let a = audit_complexity(&cfg)?;
        println!("base {base:>2}: {:.3} M params, {:.2} GFLOPs, {:.3} MB", a.megaparams(), a.gflops(), a.megabytes());
    }
    Ok(())
}
