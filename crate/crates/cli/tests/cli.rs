//! End-to-end tests of the command-line interface: exit codes, output
//! formats, determinism and config handling.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mimo-rade"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn");
    assert!(
        out.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn tmp_path(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("mimo_rade_cli_{}_{name}", std::process::id()))
}

/// Zeroes timing fields and the timestamp in a parsed report.
fn strip_volatile(value: &mut serde_json::Value) {
    value["provenance"]["timestamp_unix"] = 0.into();
    for cell in value["cells"].as_array_mut().unwrap() {
        cell["wall_seconds"] = 0.into();
    }
}

#[test]
fn experiment1_json_report() {
    let out = run_ok(&[
        "experiment1",
        "--n",
        "3",
        "--m",
        "4",
        "--sigma",
        "0.000000001",
        "--matrices",
        "2",
        "--messages",
        "10",
        "--seed",
        "42",
    ]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["experiment"], "experiment1");
    assert_eq!(report["cells"][0]["proportion"], 1.0);
    assert_eq!(report["provenance"]["master_seed"], 42);
    assert_eq!(report["config"]["master_seed"], 42);
}

#[test]
fn repeated_invocations_identical_modulo_volatile() {
    let args = [
        "experiment3",
        "--n",
        "3",
        "--m",
        "4",
        "--sigma",
        "0.5",
        "--matrices",
        "2",
        "--messages",
        "15",
        "--t",
        "1,2",
        "--seed",
        "7",
    ];
    let mut a: serde_json::Value = serde_json::from_slice(&run_ok(&args).stdout).unwrap();
    let mut b: serde_json::Value = serde_json::from_slice(&run_ok(&args).stdout).unwrap();
    strip_volatile(&mut a);
    strip_volatile(&mut b);
    assert_eq!(a, b);
}

#[test]
fn decode_noiseless_round_trip() {
    for scheme in ["brute", "nnx", "rade1", "rade2"] {
        let out = run_ok(&[
            "decode", "--n", "4", "--m", "8", "--sigma", "0", "--seed", "1", "--scheme", scheme,
        ]);
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["matched"], true, "scheme {scheme}: {v}");
        assert_eq!(v["decoded"], v["transmitted"]);
    }
}

#[test]
fn seed_env_fallback() {
    let with_env = bin()
        .args(["decode", "--n", "3", "--scheme", "brute"])
        .env("MIMO_RADE_SEED", "12345")
        .output()
        .unwrap();
    assert!(with_env.status.success());
    let v: serde_json::Value = serde_json::from_slice(&with_env.stdout).unwrap();
    assert_eq!(v["seed"], 12345);

    let with_flag = bin()
        .args(["decode", "--n", "3", "--scheme", "brute", "--seed", "9"])
        .env("MIMO_RADE_SEED", "12345")
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_slice(&with_flag.stdout).unwrap();
    assert_eq!(v["seed"], 9, "explicit flag overrides the environment");
}

#[test]
fn config_file_and_flag_precedence() {
    let path = tmp_path("config.json");
    std::fs::write(
        &path,
        r#"{"n_list": [3], "sigma_list": [0.5], "m": 4, "matrices_per_n": 2, "messages_per_matrix": 10, "master_seed": 5}"#,
    )
    .unwrap();
    let out = run_ok(&[
        "experiment1",
        "--config",
        path.to_str().unwrap(),
        "--messages",
        "12",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["messages_per_matrix"], 12, "flag wins");
    assert_eq!(v["config"]["master_seed"], 5, "config survives");
    std::fs::remove_file(&path).ok();
}

#[test]
fn effective_config_round_trips() {
    let out = run_ok(&[
        "experiment1",
        "--n",
        "3",
        "--m",
        "4",
        "--sigma",
        "0.6",
        "--matrices",
        "2",
        "--messages",
        "10",
        "--seed",
        "77",
    ]);
    let mut first: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();

    let path = tmp_path("effective.json");
    std::fs::write(&path, serde_json::to_string(&first["config"]).unwrap()).unwrap();
    let rerun = run_ok(&["experiment1", "--config", path.to_str().unwrap()]);
    let mut second: serde_json::Value = serde_json::from_slice(&rerun.stdout).unwrap();

    strip_volatile(&mut first);
    strip_volatile(&mut second);
    assert_eq!(first, second, "reloading the effective config reproduces the run");
    std::fs::remove_file(&path).ok();
}

#[test]
fn invalid_config_exits_2_naming_key() {
    let path = tmp_path("bad.json");
    std::fs::write(&path, r#"{"n_list": [3], "messages_per_matrix": 0}"#).unwrap();
    let out = bin()
        .args(["experiment1", "--config", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("messages_per_matrix"), "{err}");
    std::fs::remove_file(&path).ok();

    let path = tmp_path("unknown.json");
    std::fs::write(&path, r#"{"n_lst": [3]}"#).unwrap();
    let out = bin()
        .args(["experiment1", "--config", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_lst"));
    std::fs::remove_file(&path).ok();
}

#[test]
fn unknown_flag_exits_2() {
    let out = bin().args(["experiment1", "--frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn strict_budget_refusal_exits_3() {
    let out = bin()
        .args([
            "experiment1",
            "--n",
            "3",
            "--m",
            "4",
            "--sigma",
            "0.5",
            "--matrices",
            "1",
            "--messages",
            "5",
            "--brute-mode",
            "skip",
            "--strict",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    // Without --strict the same run succeeds.
    let out = run_ok(&[
        "experiment1",
        "--n",
        "3",
        "--m",
        "4",
        "--sigma",
        "0.5",
        "--matrices",
        "1",
        "--messages",
        "5",
        "--brute-mode",
        "skip",
    ]);
    assert!(out.status.success());
}

#[test]
fn csv_and_text_formats() {
    let base = [
        "experiment2", "--n", "3", "--m", "4", "--sigma", "0.5", "--matrices", "1",
        "--messages", "8", "--k", "1,2n+1", "--seed", "3",
    ];
    let csv = run_ok(&[&base[..], &["--format", "csv"]].concat());
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("n,sigma,scheme,params"));
    assert_eq!(text.trim_end().lines().count(), 3, "header + 2 cells");

    let table = run_ok(&[&base[..], &["--format", "text-table"]].concat());
    let text = String::from_utf8(table.stdout).unwrap();
    assert!(text.contains("k=1") && text.contains("k=7"));
}

#[test]
fn observation2_output() {
    let out = run_ok(&["observation2", "--n", "6", "--matrices", "20", "--seed", "11"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["mean_s_mild"].as_f64().unwrap() > 0.0);
    assert!(v["mean_ratio"].as_f64().unwrap() > 0.0);
}

#[test]
fn cache_neighbors_writes_usable_file() {
    let dir = tmp_path("cache_dir");
    std::fs::create_dir_all(&dir).unwrap();
    let file = dir.join("nnx_m4_n3_k7.bin");
    run_ok(&[
        "cache-neighbors",
        "--m",
        "4",
        "--n",
        "3",
        "--k",
        "2n+1",
        "--out",
        file.to_str().unwrap(),
    ]);
    assert!(file.is_file());
    // An experiment run picks the cache up.
    run_ok(&[
        "experiment2",
        "--n",
        "3",
        "--m",
        "4",
        "--sigma",
        "0.5",
        "--matrices",
        "1",
        "--messages",
        "5",
        "--k",
        "2n+1",
        "--neighbors-cache",
        dir.to_str().unwrap(),
    ]);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn output_file_written() {
    let path = tmp_path("report.json");
    run_ok(&[
        "experiment1",
        "--n",
        "3",
        "--m",
        "4",
        "--sigma",
        "0.5",
        "--matrices",
        "1",
        "--messages",
        "5",
        "--out",
        path.to_str().unwrap(),
    ]);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["experiment"], "experiment1");
    std::fs::remove_file(&path).ok();
}
