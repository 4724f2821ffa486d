//! End-to-end checks of the `buildseg` binary: exit codes, the output
//! directory contract, and byte-level idempotence of re-runs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_buildseg"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("buildseg_cli_{name}_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Relative path -> content hash for every file under root.
fn tree_digest(root: &Path) -> Vec<(String, [u8; 32])> {
    fn walk(root: &Path, dir: &Path, acc: &mut Vec<(String, [u8; 32])>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, acc);
            } else {
                let bytes = std::fs::read(&path).unwrap();
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                acc.push((rel, Sha256::digest(&bytes).into()));
            }
        }
    }
    let mut acc = Vec::new();
    walk(root, root, &mut acc);
    acc.sort();
    acc
}

fn path_str(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

#[test]
fn unknown_subcommand_exits_2_with_usage() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage"), "no usage text:\n{err}");
}

#[test]
fn unknown_flag_exits_2() {
    let out = bin().args(["synth", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_exits_0() {
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn pipeline_error_exits_1_with_one_line_diagnostic() {
    let dir = tmp_dir("err");
    let out = bin()
        .args([
            "eval",
            "--checkpoint",
            "/nonexistent/model.ckpt",
            "--manifest",
            "/nonexistent/store",
            "--out",
            &path_str(&dir),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.lines().filter(|l| l.starts_with("error:")).count(), 1, "stderr:\n{err}");
}

#[test]
fn missing_out_dir_is_a_config_error() {
    let out = bin().args(["synth", "--scenes", "2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("output directory"));
}

#[test]
fn synth_is_idempotent_and_echoes_config() {
    let dir = tmp_dir("synth");
    let args =
        ["synth", "--seed", "7", "--scenes", "3", "--domain", "a", "--out", &path_str(&dir)];
    let out = run_ok(&args);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("[optimizer]"), "resolved config not echoed:\n{stdout}");
    assert!(dir.join("config.toml").is_file());
    assert!(dir.join("synthetic_a/adapter.toml").is_file());
    assert!(dir.join("synthetic_a/images/scene_a_0000.png").is_file());

    let first = tree_digest(&dir);
    run_ok(&args);
    assert_eq!(first, tree_digest(&dir), "re-run changed bytes");
}

#[test]
fn fuse_train_eval_round_trip() {
    let dir = tmp_dir("pipeline");
    let out_s = path_str(&dir);
    run_ok(&["synth", "--seed", "11", "--scenes", "12", "--domain", "a", "--out", &out_s]);

    let corpus = path_str(&dir.join("synthetic_a"));
    let fuse_args = ["fuse", &corpus, "--seed", "11", "--out", &out_s];
    run_ok(&fuse_args);
    let store = dir.join("patches");
    assert!(store.join("manifest.jsonl").is_file());
    assert!(store.join("stats.json").is_file());
    let fuse_digest = tree_digest(&store);
    run_ok(&fuse_args);
    assert_eq!(fuse_digest, tree_digest(&store), "fuse re-run changed the store");

    let store_s = path_str(&store);
    let train_args = [
        "train",
        "--store",
        &store_s,
        "--model",
        "tiny",
        "--max-iters",
        "4",
        "--batch-size",
        "2",
        "--seed",
        "5",
        "--out",
        &out_s,
    ];
    run_ok(&train_args);
    let ckpt = dir.join("checkpoints/ck_final.ckpt");
    let log = dir.join("logs/train_log.csv");
    assert!(ckpt.is_file());
    let log_text = std::fs::read_to_string(&log).unwrap();
    assert!(log_text.starts_with("iter,lr,loss"), "log header:\n{log_text}");
    assert_eq!(log_text.lines().count(), 5, "4 iterations + header");

    let ckpt_bytes = std::fs::read(&ckpt).unwrap();
    let log_bytes = std::fs::read(&log).unwrap();
    run_ok(&train_args);
    assert_eq!(ckpt_bytes, std::fs::read(&ckpt).unwrap(), "checkpoint not reproducible");
    assert_eq!(log_bytes, std::fs::read(&log).unwrap(), "loss log not reproducible");

    // Train split is never empty here, so score it with the echo oracle.
    let eval_args = [
        "eval",
        "--checkpoint",
        "echo",
        "--manifest",
        &store_s,
        "--split",
        "train",
        "--overlays",
        "overlays",
        "--out",
        &out_s,
    ];
    let out = run_ok(&eval_args);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("1.0000"), "echo must score 1.0:\n{stdout}");
    assert!(dir.join("reports/report.txt").is_file());
    assert!(dir.join("reports/report.jsonl").is_file());
    assert!(dir.join("reports/report.meta.json").is_file());
    let overlays: Vec<_> = std::fs::read_dir(dir.join("overlays")).unwrap().collect();
    assert!(!overlays.is_empty(), "no overlays written");

    let reports_digest = tree_digest(&dir.join("reports"));
    run_ok(&eval_args);
    assert_eq!(reports_digest, tree_digest(&dir.join("reports")), "eval re-run changed reports");

    // The real checkpoint must also produce a full report, whatever it scores.
    run_ok(&[
        "eval",
        "--checkpoint",
        "checkpoints/ck_final.ckpt",
        "--manifest",
        &store_s,
        "--split",
        "train",
        "--out",
        &out_s,
    ]);
    let table = std::fs::read_to_string(dir.join("reports/report.txt")).unwrap();
    assert!(table.starts_with("Model/Dataset"), "table:\n{table}");

    // Inference on a source scene writes a mask and an overlay.
    let image = path_str(&dir.join("synthetic_a/images/scene_a_0000.png"));
    let ckpt_s = path_str(&ckpt);
    run_ok(&[
        "infer",
        "--checkpoint",
        &ckpt_s,
        "--image",
        &image,
        "--out",
        &out_s,
    ]);
    assert!(dir.join("reports/scene_a_0000_mask.png").is_file());
    assert!(dir.join("overlays/scene_a_0000_overlay.ppm").is_file());
}

#[test]
fn config_file_round_trip_reproduces_the_run() {
    let dir = tmp_dir("cfgtrip");
    let out_s = path_str(&dir);
    run_ok(&["synth", "--seed", "3", "--scenes", "2", "--domain", "b", "--out", &out_s]);
    let first = tree_digest(&dir);

    // The echoed config alone must reproduce the run (same out root inside).
    let echoed = dir.join("config.toml");
    let out = run_ok(&["synth", "--config", &path_str(&echoed)]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("domain = \"b\""));
    assert_eq!(first, tree_digest(&dir), "config-driven re-run changed bytes");
}

#[test]
fn gradcheck_prints_max_error_and_passes() {
    let out = run_ok(&["gradcheck", "--cases", "2", "--coords", "1", "--side", "16"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("max relative error"), "{stdout}");
    assert!(stdout.contains("gradient check passed"), "{stdout}");
}

#[test]
fn flags_override_config_file() {
    let dir = tmp_dir("flags");
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, "[synth]\nscenes = 9\ndomain = \"a\"\n").unwrap();
    let out = run_ok(&[
        "synth",
        "--config",
        &path_str(&cfg),
        "--scenes",
        "2",
        "--out",
        &path_str(&dir.join("o")),
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("scenes = 2"), "flag lost:\n{stdout}");
    assert!(stdout.contains("wrote 2 scenes"));
}
