//! Exit-gate criteria. Each test prints exactly one `ACCEPTANCE` line with
//! its verdict and the measured numbers, then asserts that verdict.

mod common;

use std::path::PathBuf;
use std::time::Instant;

use common::{max_abs_diff, per_group_conv, random_tensor, rng, test_cards};
use gidnet_core::analysis::{count_activations, count_convs, count_macs, count_parameters};
use gidnet_core::imaging::{self, degrade, psnr, Bicubic, EvalProtocol, ImagePlane, Upscaler};
use gidnet_core::model::{self, Model, ModelConfig};
use gidnet_core::ops::{self, ConvParams};
use gidnet_core::tensor::{Shape, Tensor};
use gidnet_core::training::{train, train_to_dir, KneeSchedule, TrainConfig};
use gidnet_core::verify::{run_suite, Suite};
use rand::Rng;

fn verdict(id: &str, pass: bool, detail: String) {
    println!("ACCEPTANCE {id}: {} | {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{id}: {detail}");
}

/// (core, nla, #params, GFLOPs, activations in M, #conv) from the published
/// complexity table.
const TABLE: [(usize, bool, f64, f64, f64, u64); 5] = [
    (16, true, 316e3, 20.7, 206.0, 62),
    (12, false, 198e3, 12.9, 149.0, 58),
    (8, false, 113e3, 7.4, 103.0, 58),
    (4, true, 57e3, 3.7, 57.0, 62),
    (4, false, 57e3, 3.7, 57.0, 58),
];

fn label(core: usize, nla: bool) -> String {
    format!("core{core}{}", if nla { "+NLA" } else { "" })
}

fn table_models() -> Vec<Model> {
    TABLE
        .iter()
        .map(|&(core, nla, ..)| Model::build(ModelConfig::new(core, nla).unwrap(), 0).unwrap())
        .collect()
}

#[test]
fn conv_count_exactness() {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for &(core, nla, .., convs) in &TABLE {
        let m = Model::build(ModelConfig::new(core, nla).unwrap(), 0).unwrap();
        let got = count_convs(&m);
        ok &= got == convs;
        parts.push(format!("{}={got}/{convs}", label(core, nla)));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 1.0;
    verdict("conv_count", ok, format!("{} in {secs:.3}s", parts.join(" ")));
}

#[test]
fn parameter_counts() {
    let mut ok = true;
    let mut parts = Vec::new();
    for (m, &(core, nla, target, ..)) in table_models().iter().zip(&TABLE) {
        let got = count_parameters(m);
        let rel = (got as f64 - target) / target;
        ok &= rel.abs() <= 0.05;
        parts.push(format!("{}={got} ({:+.2}% vs {:.0}K)", label(core, nla), 100.0 * rel, target / 1e3));
    }
    verdict("params_within_5pct", ok, parts.join(" "));
}

#[test]
fn flops_identity() {
    let mut ok = true;
    let mut parts = Vec::new();
    for (m, &(core, nla, _, gflops, ..)) in table_models().iter().zip(&TABLE) {
        let macs = count_macs(m, 256, 256);
        let exact = macs == count_parameters(m) * 65_536;
        let rel = (macs as f64 / 1e9 - gflops) / gflops;
        ok &= exact && rel.abs() <= 0.10;
        parts.push(format!("{}={:.2}G ({:+.2}%, identity {exact})", label(core, nla), macs as f64 / 1e9, 100.0 * rel));
    }
    verdict("flops_identity", ok, parts.join(" "));
}

#[test]
fn activation_counts() {
    let mut ok = true;
    let mut parts = Vec::new();
    for (m, &(core, nla, _, _, acts, _)) in table_models().iter().zip(&TABLE) {
        let got = count_activations(m, 256, 256) as f64 / 1e6;
        let rel = (got - acts) / acts;
        ok &= rel.abs() <= 0.06;
        parts.push(format!("{}={got:.1}M ({:+.2}%)", label(core, nla), 100.0 * rel));
    }
    verdict("activations_within_6pct", ok, parts.join(" "));
}

fn bench_root() -> PathBuf {
    std::env::var_os("GIDNET_BENCH_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../bench"))
}

#[test]
fn bicubic_baseline() {
    let start = Instant::now();
    let root = bench_root();
    let proto = EvalProtocol::benchmark(4);
    let mut ok = true;
    let mut parts = Vec::new();
    for (set, want) in [("Set5", 28.42), ("Set14", 26.00)] {
        let dir = root.join(set);
        match imaging::eval_dataset(&Bicubic { scale: 4 }, &dir, &proto) {
            Ok(r) => {
                let pass = (r.mean_psnr - want).abs() <= 0.15;
                ok &= pass;
                parts.push(format!("{set}={:.3}dB (target {want} +-0.15, {} images)", r.mean_psnr, r.images.len()));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{set}: dataset not found or unreadable at {} ({e})", dir.display()));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 30.0;
    verdict("bicubic_set5_set14", ok, format!("{} in {secs:.2}s", parts.join("; ")));
}

#[test]
fn grouped_conv_oracle_equivalence() {
    let mut r = rng(31337);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let ci = 4 * r.random_range(1..5);
        let co = 4 * r.random_range(1..5);
        let dims = [r.random_range(1..3), ci, r.random_range(1..10), r.random_range(1..10)];
        let x = random_tensor(&mut r, dims, 1.0);
        let w = random_tensor(&mut r, [co, ci / 4, 3, 3], 1.0);
        let b: Vec<f32> = (0..co).map(|_| r.random_range(-1.0..1.0)).collect();
        let fast = ops::conv2d(&x, &ConvParams::new(w.clone(), b.clone(), 4).unwrap()).unwrap();
        worst = worst.max(max_abs_diff(&fast, &per_group_conv(&x, &w, &b, 4)));
    }
    verdict("grouped_conv_oracle", worst <= 1e-5, format!("20 cases, max abs diff {worst:.3e} (limit 1e-5)"));
}

#[test]
fn gradient_checks() {
    let checks = run_suite(Suite::Grad);
    let required = ["conv_dense", "conv_grouped", "leaky_relu", "relu", "depth_to_space", "nla_block", "tile_attention", "charbonnier", "l2"];
    let mut ok = true;
    let mut parts = Vec::new();
    for op in required {
        let mine: Vec<_> = checks.iter().filter(|c| c.name.split('/').next() == Some(op)).collect();
        let pass = mine.len() >= 3 && mine.iter().all(|c| c.passed);
        ok &= pass;
        parts.push(format!("{op}x{}", mine.len()));
    }
    for c in checks.iter().filter(|c| !c.passed) {
        parts.push(format!("failed {}", c.name));
    }
    ok &= checks.iter().all(|c| c.passed);
    let worst = checks.iter().filter_map(|c| c.detail.rsplit(' ').next()?.parse::<f64>().ok()).fold(0.0, f64::max);
    verdict("gradient_checks", ok, format!("{} | worst rel err {worst:.2e} (limit 1e-3)", parts.join(" ")));
}

fn batch_of(images: &[ImagePlane]) -> (Tensor, Tensor, Vec<ImagePlane>, Vec<ImagePlane>) {
    let pairs: Vec<(ImagePlane, ImagePlane)> = images.iter().map(|i| degrade(i, 4).unwrap()).collect();
    let hr: Vec<ImagePlane> = pairs.iter().map(|p| p.0.clone()).collect();
    let lr: Vec<ImagePlane> = pairs.iter().map(|p| p.1.clone()).collect();
    (ImagePlane::batch_to_tensor(&lr).unwrap(), ImagePlane::batch_to_tensor(&hr).unwrap(), lr, hr)
}

#[test]
fn desk_scale_training() {
    let cards = test_cards();
    let cfg = TrainConfig {
        batch: 4,
        hr_patch: 32,
        steps_per_epoch: 20,
        epochs: 10,
        core: 4,
        use_nla: false,
        schedule: KneeSchedule {
            warmup_epochs: 1,
            exploit_epochs: 9,
            cooldown_epochs: 0,
            max_lr: 2e-3,
            floor_lr: 0.0,
        },
        ..TrainConfig::default()
    };
    let start_model = Model::build(cfg.model_config().unwrap(), 0).unwrap();
    let (lr_t, hr_t, lrs, hrs) = batch_of(&cards);
    let initial = cfg.loss.value(&start_model.forward(&lr_t).unwrap(), &hr_t).unwrap();
    let out = train(start_model, &cards, &[], &cfg, &mut |_, _, _| Ok(())).unwrap();
    let steps = out.step_losses.len();
    let fin = cfg.loss.value(&out.model.forward(&lr_t).unwrap(), &hr_t).unwrap();

    let proto = EvalProtocol { scale: 4, shave: 0, luminance: false };
    let (mut net, mut bic) = (0.0, 0.0);
    for (lr, hr) in lrs.iter().zip(&hrs) {
        net += psnr(&out.model.upscale(lr).unwrap(), hr, &proto).unwrap() / 4.0;
        bic += psnr(&Bicubic { scale: 4 }.upscale(lr).unwrap(), hr, &proto).unwrap() / 4.0;
    }
    let ok = steps == 200 && fin < 0.5 * initial && net > bic;
    verdict(
        "desk_training",
        ok,
        format!(
            "{steps} steps, charbonnier {initial:.4} -> {fin:.4} ({:.1}% of initial), patch PSNR model {net:.2}dB vs bicubic {bic:.2}dB",
            100.0 * fin / initial
        ),
    );
}

#[test]
fn determinism() {
    let dirs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    let cfg = TrainConfig {
        batch: 2,
        hr_patch: 32,
        steps_per_epoch: 3,
        epochs: 2,
        core: 4,
        use_nla: true,
        nla_tile: 4,
        ..TrainConfig::default()
    };
    let lr_img = imaging::bicubic_resize(&test_cards()[1], 0.5, true).unwrap();
    let mut artefacts = Vec::new();
    for d in &dirs {
        let p = d.path();
        let m = Model::build(cfg.model_config().unwrap(), 42).unwrap();
        model::save_weights(&m, p.join("init.gidw")).unwrap();
        let out = train_to_dir(m, &test_cards(), &[], &cfg, &p.join("run")).unwrap();
        let trained = model::load_weights(gidnet_core::training::checkpoint_path(&p.join("run"), out.best_epoch), cfg.model_config().unwrap()).unwrap();
        imaging::save_png(&trained.upscale(&lr_img).unwrap(), p.join("sr.png")).unwrap();
        let read = |name: &str| std::fs::read(p.join(name)).unwrap();
        artefacts.push([read("init.gidw"), read("run/train.log"), read("sr.png")]);
    }
    let same: Vec<bool> = (0..3).map(|i| artefacts[0][i] == artefacts[1][i]).collect();
    verdict(
        "determinism",
        same.iter().all(|&s| s),
        format!("archive identical {}, loss log identical {}, png identical {}", same[0], same[1], same[2]),
    );
}

#[test]
fn shape_contract() {
    let m = Model::build(ModelConfig::new(16, true).unwrap(), 0).unwrap();
    let mut r = rng(99);
    let mut sizes: Vec<(usize, usize)> = vec![(1, 1), (1, 7), (5, 1)];
    while sizes.len() < 10 {
        sizes.push((r.random_range(1..20), r.random_range(1..20)));
    }
    let mut ok = true;
    let mut bad = Vec::new();
    for &(h, w) in &sizes {
        let x = Tensor::from_fn(Shape::new(1, 3, h, w).unwrap(), |_, _, _, _| r.random_range(0.0..1.0));
        let y = m.forward(&x).unwrap();
        if y.shape().dims() != [1, 3, 4 * h, 4 * w] {
            ok = false;
            bad.push(format!("{h}x{w}->{}", y.shape()));
        }
    }
    let list: Vec<String> = sizes.iter().map(|(h, w)| format!("{h}x{w}")).collect();
    verdict("shape_contract", ok, format!("sizes {} {}", list.join(","), bad.join(" ")));
}
