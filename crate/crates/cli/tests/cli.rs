use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sparseopt::data::{write_sodata, Dataset};

fn sparseopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparseopt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Two classes of `side`×`side` images: bright left half vs bright right
/// half, with jitter.
fn toy_dataset(side: usize, n: usize, salt: u8) -> Dataset {
    let mut pixels = Vec::with_capacity(n * side * side);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        for p in 0..side * side {
            let left = p % side < side / 2;
            let base: u8 = if left == (class == 0) { 200 } else { 30 };
            pixels.push(base.wrapping_add(((i * 7 + p * 3) as u8 ^ salt) % 40));
        }
        labels.push(class);
    }
    Dataset::from_bytes(&pixels, side, side, labels, Some(2)).unwrap()
}

fn write_toy(dir: &Path, side: usize) {
    fs::write(dir.join("train.sodata"), write_sodata(&toy_dataset(side, 64, 1))).unwrap();
    fs::write(dir.join("test.sodata"), write_sodata(&toy_dataset(side, 32, 5))).unwrap();
}

#[test]
fn membudget_single_layer_csv() {
    let out = stdout(&sparseopt(&[
        "membudget", "--layer", "1000x784", "--method", "so,adam", "--kappa", "1%", "--format", "csv",
    ]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3, "{out}");
    assert!(lines[0].starts_with("method,weight_vars"));
    // ⌊2·784000·0.01⌋ gradient entries and ⌊3·784000·0.01⌋ state entries
    assert!(lines[1].contains(",784000,") && lines[1].contains(",15680,") && lines[1].contains(",23520,"));
    assert!(lines[2].contains(",1568000,"), "{}", lines[2]);
}

#[test]
fn membudget_markdown_and_kappa_forms_agree() {
    let pct = stdout(&sparseopt(&["membudget", "--preset", "mlp", "--method", "so", "--kappa", "10%"]));
    let frac = stdout(&sparseopt(&["membudget", "--preset", "mlp", "--method", "so", "--kappa", "0.1"]));
    assert_eq!(pct, frac);
    assert!(pct.starts_with("| Method"));
}

#[test]
fn membudget_reads_layer_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("layers.csv");
    fs::write(&file, "m,n\n128,784\n128,128\n").unwrap();
    let from_file = stdout(&sparseopt(&[
        "membudget", "--layers", file.to_str().unwrap(), "--method", "lora", "--rank", "2", "--format", "csv",
    ]));
    let preset = stdout(&sparseopt(&["membudget", "--preset", "mlp", "--method", "lora", "--rank", "2", "--format", "csv"]));
    assert_eq!(from_file, preset);
}

#[test]
fn membudget_errors_exit_nonzero() {
    for args in [
        &["membudget", "--layer", "10x10", "--method", "so", "--kappa", "abc"][..],
        &["membudget", "--layer", "10x10", "--method", "so"],
        &["membudget", "--layer", "10x10", "--method", "lora"],
        &["membudget", "--layer", "10x10", "--method", "sgd"],
        &["membudget", "--layer", "10x10", "--method", "so", "--kappa", "150%"],
    ] {
        let out = sparseopt(args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn preset_prints_loadable_config() {
    let out = stdout(&sparseopt(&["preset", "rank-random", "--dataset", "/data/mnist"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["track_rank"], true);
    assert_eq!(v["dataset"], "/data/mnist");
}

#[test]
fn train_then_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    write_toy(dir.path(), 4);
    let config = dir.path().join("toy.json");
    fs::write(
        &config,
        r#"{"name": "toy", "dataset": ".", "max_iters": 30, "seeds": [0, 1], "batch_size": 16,
            "optimizer": {"method": "so", "kappa": 0.5, "interval": 5}}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = stdout(&sparseopt(&[
        "train", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap(),
    ]));
    assert!(out.contains("| toy |"), "{out}");
    for s in 0..2 {
        let csv = fs::read_to_string(out_dir.join(format!("seed_{s}.csv"))).unwrap();
        assert!(csv.starts_with("iteration,train_loss,test_accuracy,touched_params,rank_w1,rank_w2\n"));
        assert!(out_dir.join(format!("seed_{s}.meta.json")).exists());
    }
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    fs::remove_file(out_dir.join("summary.csv")).unwrap();
    let again = stdout(&sparseopt(&["aggregate", out_dir.to_str().unwrap()]));
    assert_eq!(again, out);
    assert_eq!(fs::read_to_string(out_dir.join("summary.csv")).unwrap(), summary);
}

#[test]
fn pretrain_then_adapt() {
    let dir = tempfile::tempdir().unwrap();
    // checkpoints only hold 784-input models
    write_toy(dir.path(), 28);
    let ckpt = dir.path().join("base.somlp");
    let data = dir.path().to_str().unwrap();
    let out = sparseopt(&["pretrain", "--dataset", data, "--ckpt", ckpt.to_str().unwrap(), "--max-iters", "20"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(ckpt.exists());
    let side: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("base.somlp.json")).unwrap()).unwrap();
    assert_eq!(side["optimizer"], "adam");

    let config = dir.path().join("adapt.json");
    fs::write(
        &config,
        r#"{"name": "adapt", "dataset": ".", "max_iters": 10, "seeds": [3],
            "mode": {"type": "adapt", "checkpoint": "base.somlp", "shots": 4}}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("adapt-out");
    stdout(&sparseopt(&["train", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]));
    assert!(out_dir.join("seed_3.meta.json").exists());
}

#[test]
fn train_reports_missing_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    fs::write(&config, r#"{"dataset": "nowhere"}"#).unwrap();
    let out = sparseopt(&["train", "--config", config.to_str().unwrap()]);
    assert!(!out.status.success());
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"datset": "x"}"#).unwrap();
    assert!(!sparseopt(&["train", "--config", bad.to_str().unwrap()]).status.success());
}
