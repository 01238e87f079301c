//! End-to-end tests of the `sqa` binary: argument handling, exit codes,
//! and file formats.

use std::path::PathBuf;
use std::process::{Command, Output};

fn sqa() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sqa"))
}

fn write_temp(name: &str, content: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sqa-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn classify_prints_variant_tag() {
    let cfg = write_temp("sqa.json", r#"{"d_model":256,"H":16,"H_q":8,"H_kv":4}"#);
    let out = sqa().args(["classify", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success());
    assert_eq!(stdout_of(&out).trim(), "SQA");

    let cfg = write_temp("xsqa.json", r#"{"d_model":256,"H":16,"H_q":4,"H_kv":4}"#);
    let out = sqa().args(["classify", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(stdout_of(&out).trim(), "xSQA");
}

#[test]
fn classify_rejects_invalid_config_nonzero_exit() {
    let cfg = write_temp("bad.json", r#"{"d_model":256,"H":16,"H_q":3,"H_kv":2}"#);
    let out = sqa().args(["classify", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn flops_emits_report_json() {
    let cfg = write_temp("flops.json", r#"{"d_model":256,"H":16,"H_q":8,"H_kv":4}"#);
    let out = sqa()
        .args(["flops", "--n", "1024", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    for key in [
        "qkv_projection_flops",
        "score_flops",
        "aggregation_flops",
        "output_projection_flops",
        "softmax_flops",
        "total",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    // Score term: 2 * H_q * N^2 * d_head.
    assert_eq!(
        v["score_flops"].as_u64().unwrap(),
        2 * 8 * 1024 * 1024 * 16
    );
}

#[test]
fn flops_effective_mode_counts_less_under_causal_mask() {
    let cfg = write_temp(
        "flops_causal.json",
        r#"{"d_model":256,"H":16,"H_q":8,"H_kv":4,"mask":"causal"}"#,
    );
    let run = |mode: &str| -> u64 {
        let out = sqa()
            .args(["flops", "--n", "64", "--mode", mode, "--config"])
            .arg(&cfg)
            .output()
            .unwrap();
        assert!(out.status.success());
        let v: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
        v["score_flops"].as_u64().unwrap()
    };
    let dense = run("dense");
    let effective = run("effective");
    // Causal allows 64*65/2 of the 64*64 positions.
    assert_eq!(effective * 64 * 64, dense * (64 * 65 / 2));
}

#[test]
fn train_with_zero_rate_is_flat_and_exits_zero() {
    let cfg = write_temp("train.json", r#"{"d_model":32,"H":8,"H_q":4,"H_kv":2}"#);
    let out = sqa()
        .args(["train", "--steps", "3", "--lr", "0", "--seed", "5", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success());
    let body = stdout_of(&out);
    let losses: Vec<f64> = body
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(losses.len(), 3);
    assert_eq!(losses[0], losses[1]);
    assert_eq!(losses[1], losses[2]);
}

#[test]
fn check_flops_suite_passes() {
    let out = sqa().args(["check", "--suite", "flops"]).output().unwrap();
    assert!(out.status.success(), "{}", stdout_of(&out));
    assert!(stdout_of(&out).contains("[PASS]"));
}

#[test]
fn check_rejects_unknown_suite() {
    let out = sqa().args(["check", "--suite", "vibes"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn bench_writes_parseable_csv_and_honors_thread_env() {
    let spec = write_temp(
        "spec.json",
        r#"{
          "configs": [
            {"d_model": 32, "H": 4, "H_q": 4, "H_kv": 4},
            {"d_model": 32, "H": 4, "H_q": 2, "H_kv": 2}
          ],
          "seq_lens": [8, 16],
          "repeats": 3,
          "warmup": 0,
          "seed": 1
        }"#,
    );
    let out_path = write_temp("out.csv", "");
    let out = sqa()
        .env("SQA_THREADS", "1")
        .args(["bench", "--quiet", "--spec"])
        .arg(&spec)
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.contains("# threads=1"));
    let rows = sqa_cli::csv::parse(&text).unwrap();
    assert_eq!(rows.len(), 4);
    // Baseline rows carry speedup exactly 1.
    assert!(rows.iter().any(|r| r.variant == "MHA" && r.speedup == 1.0));
}
