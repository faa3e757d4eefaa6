use std::path::Path;
use std::process::{Command, Output};

use gidnet_core::imaging::{load_png, save_png, ImagePlane};

fn gidnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gidnet"))
        .args(args)
        .env_remove("GIDNET_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = gidnet(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gradient(w: usize, h: usize, k: usize) -> ImagePlane {
    ImagePlane::from_fn(w, h, |x, y| {
        [
            ((x * 7 + k * 40) % 256) as u8,
            ((y * 5 + x) % 256) as u8,
            if (x / 4 + y / 4 + k).is_multiple_of(2) { 30 } else { 220 },
        ]
    })
    .unwrap()
}

fn write_images(dir: &Path, n: usize, w: usize, h: usize) {
    std::fs::create_dir_all(dir).unwrap();
    for k in 0..n {
        save_png(&gradient(w, h, k), dir.join(format!("img{k}.png"))).unwrap();
    }
}

#[test]
fn init_then_sr_scales_by_four() {
    let d = tempfile::tempdir().unwrap();
    let w = d.path().join("m.gidw");
    ok(&["init", "--core", "4", "--nla", "--out", p(&w)]);
    save_png(&gradient(120, 80, 0), d.path().join("lr.png")).unwrap();
    let sr = d.path().join("sr.png");
    let msg = ok(&["sr", "--model", p(&w), "--in", p(&d.path().join("lr.png")), "--out", p(&sr)]);
    assert!(msg.contains("120x80 -> 480x320"), "{msg}");
    let img = load_png(&sr).unwrap();
    assert_eq!((img.width(), img.height()), (480, 320));
}

#[test]
fn sr_output_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let w = d.path().join("m.gidw");
    ok(&["--seed", "3", "init", "--core", "4", "--out", p(&w)]);
    save_png(&gradient(17, 9, 1), d.path().join("lr.png")).unwrap();
    let lr = d.path().join("lr.png");
    let a = d.path().join("a.png");
    let b = d.path().join("b.png");
    ok(&["sr", "--model", p(&w), "--in", p(&lr), "--out", p(&a)]);
    ok(&["--threads", "1", "sr", "--model", p(&w), "--in", p(&lr), "--out", p(&b)]);
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn count_matches_reference_numbers() {
    let kv = ok(&["count", "--core", "16", "--nla", "--kv"]);
    assert!(kv.contains("params=319792\n"), "{kv}");
    assert!(kv.contains("convs=62\n"));
    assert!(kv.contains(&format!("macs={}\n", 319_792u64 * 65_536)));
    let small = ok(&["count", "--core", "4", "--input-size", "1x1", "--kv"]);
    assert!(small.contains("macs=59608\n"), "{small}");
}

#[test]
fn bad_core_is_rejected() {
    let out = gidnet(&["count", "--core", "6"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("divisible by 4"));
}

#[test]
fn corrupt_archive_names_missing_entry() {
    let d = tempfile::tempdir().unwrap();
    let w = d.path().join("m.gidw");
    ok(&["init", "--core", "4", "--out", p(&w)]);
    let bytes = std::fs::read(&w).unwrap();
    std::fs::write(&w, &bytes[..bytes.len() - 100]).unwrap();
    save_png(&gradient(8, 8, 0), d.path().join("lr.png")).unwrap();
    let out = gidnet(&["sr", "--model", p(&w), "--in", p(&d.path().join("lr.png")), "--out", p(&d.path().join("o.png"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("upsample"), "{err}");
}

#[test]
fn bicubic_eval_reports_per_image_and_mean() {
    let d = tempfile::tempdir().unwrap();
    write_images(d.path(), 1, 48, 40);
    let rgb = ok(&["eval", "--bicubic", "--hr-dir", p(d.path()), "--kv"]);
    let y = ok(&["eval", "--bicubic", "--hr-dir", p(d.path()), "--y", "--kv"]);
    let mean = |s: &str| -> f64 {
        s.lines().find_map(|l| l.strip_prefix("mean_psnr=")).unwrap().parse().unwrap()
    };
    assert!(rgb.contains("psnr.img0.png="), "{rgb}");
    assert!(mean(&rgb).is_finite() && mean(&y).is_finite());
    assert_ne!(mean(&rgb), mean(&y));
}

#[test]
fn eval_needs_a_model_or_bicubic() {
    let d = tempfile::tempdir().unwrap();
    assert!(!gidnet(&["eval", "--hr-dir", p(d.path())]).status.success());
    let out = gidnet(&["eval", "--bicubic", "--hr-dir", p(d.path())]);
    assert!(!out.status.success());
}

fn write_config(path: &Path) {
    std::fs::write(
        path,
        "# tiny run\nbatch = 2\nhr_patch = 16\nsteps_per_epoch = 2\nepochs = 2\ncore = 4\nnla = false\n\
         warmup_epochs = 1\nexploit_epochs = 1\ncooldown_epochs = 0\nmax_lr = 1e-3\nseed = 5\n",
    )
    .unwrap();
}

#[test]
fn train_smoke_is_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("data");
    write_images(&data, 4, 24, 24);
    let cfg = d.path().join("train.cfg");
    write_config(&cfg);
    let mut logs = Vec::new();
    for run in ["a", "b"] {
        let out = d.path().join(run);
        ok(&["train", "--config", p(&cfg), "--data", p(&data), "--val", p(&data), "--out", p(&out)]);
        let log = std::fs::read_to_string(out.join("train.log")).unwrap();
        assert_eq!(log.lines().count(), 2, "{log}");
        let ckpts: Vec<_> = std::fs::read_dir(&out)
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.path().extension().is_some_and(|x| x == "gidw"))
            .collect();
        assert!(!ckpts.is_empty());
        logs.push(log);
    }
    assert_eq!(logs[0], logs[1]);
}

#[test]
fn train_with_missing_data_fails() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("train.cfg");
    write_config(&cfg);
    let out = gidnet(&["train", "--config", p(&cfg), "--data", p(&d.path().join("nope")), "--out", p(&d.path().join("o"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("training data"));
}

#[test]
fn train_rejects_unknown_config_key() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("data");
    write_images(&data, 1, 24, 24);
    let cfg = d.path().join("train.cfg");
    std::fs::write(&cfg, "batch = 2\nlearning_rate = 3\n").unwrap();
    let out = gidnet(&["train", "--config", p(&cfg), "--data", p(&data), "--out", p(&d.path().join("o"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn verify_suites_pass() {
    for suite in ["ops", "counters", "grad"] {
        let out = ok(&["verify", "--suite", suite]);
        assert!(out.lines().count() > 0);
        assert!(out.lines().all(|l| l.starts_with("[PASS]")), "{out}");
    }
}
