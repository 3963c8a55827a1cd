//! Parameter, FLOP and size accounting derived from the configuration alone,
//! without building tensors.
//!
//! FLOPs are `2 x MACs` for every convolution, transposed convolution and
//! projection, plus one operation per element for activations, residual
//! adds and gating products, two per element for inference-time batch norm,
//! and one per window cell for pooling. Transposed convolutions count MACs on
//! the input side (each input pixel scatters one `cout x k x k` block).

use serde::Serialize;

use crate::config::{FeatureMapSpec, ModelConfig, SfrbConv};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LayerKind {
    Conv,
    TransposedConv,
    BatchNorm,
    Activation,
    Pool,
    Elementwise,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerCost {
    pub name: String,
    pub kind: LayerKind,
    pub params: u64,
    pub macs: u64,
    /// FLOPs outside multiply-accumulates.
    pub other_flops: u64,
    pub output: FeatureMapSpec,
}

impl LayerCost {
    pub fn flops(&self) -> u64 {
        2 * self.macs + self.other_flops
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComplexityAudit {
    pub parameter_count: u64,
    pub flops: u64,
    pub serialized_bytes: u64,
    pub layers: Vec<LayerCost>,
}

impl ComplexityAudit {
    pub fn macs(&self) -> u64 {
        self.layers.iter().map(|l| l.macs).sum()
    }

    pub fn gflops(&self) -> f64 {
        self.flops as f64 / 1e9
    }

    pub fn megaparams(&self) -> f64 {
        self.parameter_count as f64 / 1e6
    }

    /// Serialized size in MiB.
    pub fn megabytes(&self) -> f64 {
        self.serialized_bytes as f64 / (1u64 << 20) as f64
    }

    /// Sum over layers whose name starts with `prefix`.
    pub fn params_under(&self, prefix: &str) -> u64 {
        self.layers
            .iter()
            .filter(|l| l.name.starts_with(prefix))
            .map(|l| l.params)
            .sum()
    }
}

#[derive(Default)]
struct Walk {
    layers: Vec<LayerCost>,
}

impl Walk {
    fn push(&mut self, name: String, kind: LayerKind, params: u64, macs: u64, other: u64, output: FeatureMapSpec) {
        self.layers.push(LayerCost {
            name,
            kind,
            params,
            macs,
            other_flops: other,
            output,
        });
    }

    fn conv(&mut self, name: &str, x: FeatureMapSpec, cout: usize, k: usize, groups: usize, bias: bool) -> FeatureMapSpec {
        let per_out = (x.channels / groups * k * k) as u64;
        let params = per_out * cout as u64 + if bias { cout as u64 } else { 0 };
        let out = FeatureMapSpec::new(x.height, x.width, cout);
        let bias_adds = if bias { out.numel() as u64 } else { 0 };
        self.push(name.into(), LayerKind::Conv, params, per_out * out.numel() as u64, bias_adds, out);
        out
    }

    fn up(&mut self, name: &str, x: FeatureMapSpec, cout: usize) -> FeatureMapSpec {
        let params = (x.channels * cout * 9 + cout) as u64;
        let macs = (x.numel() * cout * 9) as u64;
        let out = FeatureMapSpec::new(2 * x.height, 2 * x.width, cout);
        self.push(name.into(), LayerKind::TransposedConv, params, macs, out.numel() as u64, out);
        out
    }

    fn bn(&mut self, name: &str, x: FeatureMapSpec) {
        self.push(name.into(), LayerKind::BatchNorm, 2 * x.channels as u64, 0, 2 * x.numel() as u64, x);
    }

    fn act(&mut self, name: &str, x: FeatureMapSpec) {
        self.push(name.into(), LayerKind::Activation, 0, 0, x.numel() as u64, x);
    }

    fn eltwise(&mut self, name: &str, x: FeatureMapSpec) {
        self.push(name.into(), LayerKind::Elementwise, 0, 0, x.numel() as u64, x);
    }

    fn pool(&mut self, name: &str, out: FeatureMapSpec, window: usize) {
        self.push(name.into(), LayerKind::Pool, 0, 0, (out.numel() * window) as u64, out);
    }

    fn stem(&mut self, cfg: &ModelConfig) -> (FeatureMapSpec, FeatureMapSpec) {
        let img = cfg.input_spec();
        let c = cfg.base_channels;
        let s1 = self.conv("stem.conv1x1", img, c, 1, 1, true);
        self.act("stem.conv1x1.relu", s1);
        let wide = if cfg.multiscale_encoder { c } else { 2 * c };
        let w = self.conv("stem.conv3x3", img, wide, 3, 1, true);
        self.act("stem.conv3x3.relu", w);
        let f1 = FeatureMapSpec::new(img.height, img.width, 2 * c);
        self.bn("stem.bn", f1);
        let s2 = FeatureMapSpec::new(f1.height / 2, f1.width / 2, f1.channels);
        self.pool("stem.pool", s2, 4);
        (s1, s2)
    }

    fn stage(&mut self, name: &str, x: FeatureMapSpec, c: usize, cfg: &ModelConfig) -> FeatureMapSpec {
        if cfg.multiscale_encoder {
            let a = self.conv(&format!("{name}.conv1x1"), x, c, 1, 1, true);
            self.act(&format!("{name}.conv1x1.relu"), a);
            let b = self.conv(&format!("{name}.conv3x3"), x, c, 3, 1, true);
            self.act(&format!("{name}.conv3x3.relu"), b);
        } else {
            let b = self.conv(&format!("{name}.conv3x3"), x, 2 * c, 3, 1, true);
            self.act(&format!("{name}.conv3x3.relu"), b);
        }
        let f = FeatureMapSpec::new(x.height, x.width, 2 * c);
        self.bn(&format!("{name}.bn"), f);
        let next = FeatureMapSpec::new(f.height / 2, f.width / 2, f.channels);
        self.pool(&format!("{name}.pool"), next, 4);
        next
    }

    fn fmam(&mut self, name: &str, x: FeatureMapSpec, cfg: &ModelConfig) {
        let c = x.channels;
        let q = self.conv(&format!("{name}.query"), x, c, 1, 1, true);
        self.conv(&format!("{name}.context"), x, c, 1, 1, true);
        self.conv(&format!("{name}.gate"), x, cfg.focal_levels + 1, 1, 1, true);
        for (l, &k) in cfg.focal_kernel_sizes.iter().enumerate() {
            let z = self.conv(&format!("{name}.focal{}", l + 1), x, c, k, c, false);
            self.act(&format!("{name}.focal{}.gelu", l + 1), z);
            self.eltwise(&format!("{name}.gate{}", l + 1), z);
        }
        self.pool(&format!("{name}.global"), FeatureMapSpec::new(1, 1, c), x.pixels());
        self.eltwise(&format!("{name}.gate{}", cfg.focal_levels + 1), x);
        // L + 1 products summed: L adds
        self.push(format!("{name}.aggregate"), LayerKind::Elementwise, 0, 0, (cfg.focal_levels * x.numel()) as u64, x);
        self.conv(&format!("{name}.modulator"), x, c, 1, 1, true);
        self.eltwise(&format!("{name}.modulate"), q);
        self.conv(&format!("{name}.proj"), x, c, 1, 1, true);
    }

    fn sfrb(&mut self, name: &str, x: FeatureMapSpec, kind: SfrbConv) {
        let c = x.channels;
        let groups = match kind {
            SfrbConv::Depthwise => c,
            SfrbConv::Full => 1,
        };
        let i1 = self.conv(&format!("{name}.conv1"), x, c, 3, groups, true);
        self.bn(&format!("{name}.bn1"), i1);
        self.act(&format!("{name}.bn1.relu"), i1);
        self.pool(&format!("{name}.avgpool"), i1, 9);
        self.pool(&format!("{name}.maxpool"), i1, 9);
        let pooled = FeatureMapSpec::new(x.height, x.width, 2 * c);
        let i2 = self.conv(&format!("{name}.conv2"), pooled, c, 3, groups, true);
        self.bn(&format!("{name}.bn2"), i2);
        self.act(&format!("{name}.bn2.relu"), i2);
        self.pool(&format!("{name}.gap"), FeatureMapSpec::new(1, 1, c), x.pixels());
        let a = self.conv(&format!("{name}.attn"), FeatureMapSpec::new(1, 1, c), c, 1, groups, true);
        self.bn(&format!("{name}.attn_bn"), a);
        self.act(&format!("{name}.attn.sigmoid"), a);
        self.eltwise(&format!("{name}.weight"), x);
        self.eltwise(&format!("{name}.residual"), x);
    }

    fn decoder(&mut self, tag: &str, d: FeatureMapSpec, skip: FeatureMapSpec, cfg: &ModelConfig) -> FeatureMapSpec {
        let c = skip.channels;
        let up = self.up(&format!("{tag}.up"), d, c);
        self.act(&format!("{tag}.up.relu"), up);
        if cfg.enable_sfrb_decoder {
            self.sfrb(&format!("sfrb.{tag}.up"), up, cfg.sfrb_conv);
        }
        if cfg.enable_fmam_skip {
            self.fmam(&format!("fmam.{tag}.skip"), skip, cfg);
        }
        if cfg.enable_sfrb_skip {
            self.sfrb(&format!("sfrb.{tag}.skip"), skip, cfg.sfrb_conv);
        }
        FeatureMapSpec::new(up.height, up.width, 2 * c)
    }
}

/// Walks the architecture for `cfg` layer by layer.
pub fn audit_complexity(cfg: &ModelConfig) -> Result<ComplexityAudit> {
    cfg.validate()?;
    let mut w = Walk::default();
    let (s1, s2) = w.stem(cfg);
    let s3 = w.stage("enc2", s2, cfg.stage_channels[1], cfg);
    let s4 = w.stage("enc3", s3, cfg.stage_channels[2], cfg);
    if cfg.enable_fmam_bottleneck {
        w.fmam("fmam", s4, cfg);
    }
    if cfg.enable_sfrb_bottleneck {
        w.sfrb("sfrb.bottleneck", s4, cfg.sfrb_conv);
    }
    let d1 = FeatureMapSpec::new(s4.height, s4.width, 2 * s4.channels);
    let d2 = w.decoder("d2", d1, s3, cfg);
    let d3 = w.decoder("d3", d2, s2, cfg);
    let d4 = w.decoder("d4", d3, s1, cfg);
    let out = w.conv("head.conv1x1", d4, cfg.num_classes, 1, 1, true);
    if cfg.head_relu_enabled {
        w.act("head.relu", out);
    }
    w.act("head.sigmoid", out);
    let parameter_count = w.layers.iter().map(|l| l.params).sum();
    let flops = w.layers.iter().map(LayerCost::flops).sum();
    Ok(ComplexityAudit {
        parameter_count,
        flops,
        serialized_bytes: 4 * parameter_count,
        layers: w.layers,
    })
}
