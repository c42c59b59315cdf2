use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use msnet::signalgen::load_dataset;

fn msnet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msnet"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = msnet(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

const SMALL: &str = r#"{
    "frames_per_class_per_snr": 10,
    "snr_list": [10],
    "frame_len": 32,
    "samples_per_symbol": 4,
    "batch_size": 16,
    "record_wall_time": false
}"#;

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), SMALL).unwrap();
    ok(dir.path(), &["generate", "--config", "c.json", "--dataset", "d.iqds"]);
    dir
}

#[test]
fn generate_writes_a_readable_dataset() {
    let dir = setup();
    let ds = load_dataset(dir.path().join("d.iqds")).unwrap();
    assert_eq!(ds.len(), 80);
    assert_eq!(ds.frame_len, 32);
}

#[test]
fn generate_is_reproducible_per_seed() {
    let dir = setup();
    ok(dir.path(), &["generate", "--config", "c.json", "--dataset", "e.iqds"]);
    ok(dir.path(), &["generate", "--config", "c.json", "--dataset", "f.iqds", "--seed", "9"]);
    let d = fs::read(dir.path().join("d.iqds")).unwrap();
    assert_eq!(d, fs::read(dir.path().join("e.iqds")).unwrap());
    assert_ne!(d, fs::read(dir.path().join("f.iqds")).unwrap());
}

#[test]
fn default_config_reports_88000_frames() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["generate", "--dataset", "full.iqds"]);
    assert!(out.lines().any(|l| l == "total_frames=88000"), "{out}");
    assert!(out.contains("class=QAM64 snr_db=-6 frames=1000"));
}

#[test]
fn negative_snr_list_flag() {
    let dir = setup();
    let out = ok(dir.path(), &["generate", "--config", "c.json", "--dataset", "n.iqds", "--snr-list", "-6,-2"]);
    assert!(out.contains("snr_db=-6") && out.contains("snr_db=-2"));
}

#[test]
fn train_outputs_and_lambda_zero() {
    let dir = setup();
    let args = ["train", "--config", "c.json", "--dataset", "d.iqds", "--epochs-stage1", "2"];
    ok(dir.path(), &[&args[..], &["--epochs-stage2", "0", "--out-dir", "a"]].concat());
    let a = dir.path().join("a");
    assert!(a.join("ckpt_s1.bin").exists());
    assert!(!a.join("ckpt_s2.bin").exists());

    ok(dir.path(), &[&args[..], &["--epochs-stage2", "1", "--lambda", "0", "--out-dir", "b"]].concat());
    let report = fs::read_to_string(dir.path().join("b/train_report.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next().unwrap(), "stage,epoch,loss_total,loss_softmax,loss_center,train_acc,test_acc,seconds");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[4] == "0"));
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), vec!["S1", "S1", "S2"]);
}

#[test]
fn training_is_byte_reproducible() {
    let dir = setup();
    for out in ["r1", "r2"] {
        ok(
            dir.path(),
            &["train", "--config", "c.json", "--dataset", "d.iqds", "--epochs-stage1", "1", "--epochs-stage2", "1", "--out-dir", out],
        );
        ok(dir.path(), &["eval", "--config", "c.json", "--dataset", "d.iqds", "--out-dir", out]);
    }
    for f in ["train_report.csv", "ckpt_s1.bin", "ckpt_s2.bin", "metrics.csv", "confusion.csv"] {
        let a = fs::read(dir.path().join("r1").join(f)).unwrap();
        assert_eq!(a, fs::read(dir.path().join("r2").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn eval_features_and_pca() {
    let dir = setup();
    ok(
        dir.path(),
        &["train", "--config", "c.json", "--dataset", "d.iqds", "--epochs-stage1", "1", "--epochs-stage2", "0", "--out-dir", "o"],
    );
    let common = ["--config", "c.json", "--dataset", "d.iqds", "--out-dir", "o"];
    let out = ok(dir.path(), &[&["eval"][..], &common].concat());
    let line = out.lines().find(|l| l.starts_with("overall_accuracy=")).unwrap();
    let acc: f64 = line["overall_accuracy=".len()..].parse().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    let metrics = fs::read(dir.path().join("o/metrics.csv")).unwrap();
    ok(dir.path(), &[&["eval"][..], &common].concat());
    assert_eq!(metrics, fs::read(dir.path().join("o/metrics.csv")).unwrap());

    ok(dir.path(), &[&["features"][..], &common].concat());
    ok(dir.path(), &[&["pca"][..], &common].concat());
    let features = fs::read_to_string(dir.path().join("o/features.csv")).unwrap();
    let pca = fs::read_to_string(dir.path().join("o/pca.csv")).unwrap();
    assert_eq!(features.lines().count(), pca.lines().count());
    assert_eq!(features.lines().next().unwrap().split(',').count(), 2 + 128);
    assert_eq!(pca.lines().next().unwrap(), "class,snr,pc1,pc2");
}

#[test]
fn untrained_network_scores_near_chance() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"frames_per_class_per_snr": 1250, "snr_list": [4], "epochs_stage1": 0, "epochs_stage2": 0}"#,
    )
    .unwrap();
    ok(dir.path(), &["generate", "--config", "c.json"]);
    ok(dir.path(), &["train", "--config", "c.json"]);
    let out = ok(dir.path(), &["eval", "--config", "c.json"]);
    let acc: f64 = out.trim().strip_prefix("overall_accuracy=").unwrap().parse().unwrap();
    assert!((acc - 0.125).abs() <= 0.05, "{acc}");
}

#[test]
fn exit_codes() {
    let dir = setup();
    fs::write(dir.path().join("bad.json"), r#"{"seed": 1, "lamda": 0.1}"#).unwrap();
    let out = msnet(dir.path(), &["train", "--config", "bad.json"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("lamda"));

    assert_eq!(code(&msnet(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&msnet(dir.path(), &["train", "--lr", "fast"])), 1);
    assert_eq!(code(&msnet(dir.path(), &["train", "--config", "c.json", "--batch-size", "1"])), 1);
    assert_eq!(code(&msnet(dir.path(), &["--help"])), 0);

    assert_eq!(code(&msnet(dir.path(), &["train", "--config", "missing.json"])), 2);
    assert_eq!(code(&msnet(dir.path(), &["train", "--config", "c.json", "--dataset", "nope.iqds"])), 2);
    assert_eq!(
        code(&msnet(dir.path(), &["eval", "--config", "c.json", "--dataset", "d.iqds", "--out-dir", "empty"])),
        2
    );
    fs::write(dir.path().join("junk.iqds"), b"JUNKJUNK").unwrap();
    assert_eq!(code(&msnet(dir.path(), &["train", "--config", "c.json", "--dataset", "junk.iqds"])), 2);

    let out = msnet(
        dir.path(),
        &["train", "--config", "c.json", "--dataset", "d.iqds", "--lr", "1e30", "--epochs-stage1", "3"],
    );
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));
}
