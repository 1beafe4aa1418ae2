//! End-to-end tests of the `cftrace` binary: argument handling, exit codes,
//! output formats, config files, and reproducibility.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cftrace"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should spawn")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout should be utf-8")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr should be utf-8")
}

/// Parses CSV output into one map per row. The values these tests inspect
/// never contain embedded commas or quotes.
fn csv_rows(text: &str) -> Vec<BTreeMap<String, String>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().expect("csv header").split(',').collect();
    lines
        .map(|line| {
            header
                .iter()
                .map(|h| h.to_string())
                .zip(line.split(',').map(|v| v.to_string()))
                .collect()
        })
        .collect()
}

fn f(row: &BTreeMap<String, String>, key: &str) -> f64 {
    row[key]
        .parse()
        .unwrap_or_else(|_| panic!("column {key} = {:?} not a float", row[key]))
}

#[test]
fn compare_reports_the_probe_record_and_verdict() {
    let out = run(&[
        "compare",
        "--kind",
        "salih",
        "--m",
        "8",
        "--n",
        "400",
        "--bit",
        "0",
        "--epsilon",
        "0.01",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let rows = csv_rows(&stdout(&out));
    assert_eq!(rows.len(), 1);
    let row = &rows[0];
    assert_eq!(row["kind"], "salih");
    assert_eq!(row["verdict"], "not_counterfactual");
    // Probe record sits a few percent under the closed-form estimate.
    let trace = f(row, "trace_detect_prob");
    let want = 5.945379091430812e-5;
    assert!(
        (trace / want - 1.0).abs() < 0.20,
        "trace {trace:e} not within 20% of {want:e}"
    );
    assert!(f(row, "standard_detect") < trace);
    // The coupling is strong for a network this deep; the run says so.
    assert!(stderr(&out).contains("first-order"));
}

#[test]
fn missing_probe_is_a_usage_error() {
    let out = run(&["compare", "--kind", "salih", "--m", "8", "--n", "16"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("probe required"));
}

#[test]
fn conflicting_probe_flags_are_a_usage_error() {
    let out = run(&[
        "trace",
        "--kind",
        "zeno",
        "--n",
        "10",
        "--epsilon",
        "0.1",
        "--delta",
        "1",
        "--width",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_kind_is_a_usage_error() {
    let out = run(&["simulate", "--kind", "warp", "--n", "4", "--epsilon", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown network kind"));
}

#[test]
fn dark_port_post_selection_exits_one() {
    let out = run(&[
        "trace",
        "--kind",
        "nested3",
        "--element",
        "1,1=shutter",
        "--epsilon",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("post-selection"));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["sweep", "--help"]).status.code(), Some(0));
}

#[test]
fn simulate_probabilities_sum_to_one() {
    let out = run(&[
        "simulate",
        "--kind",
        "zeno",
        "--n",
        "10",
        "--bit",
        "1",
        "--epsilon",
        "0",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut total = 0.0;
    for line in text.lines().skip(1) {
        let prob: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        total += prob;
    }
    assert!((total - 1.0).abs() < 1e-9, "probabilities sum to {total}");
    let d1 = text
        .lines()
        .find(|l| l.starts_with("D1,"))
        .expect("zeno chain output has a D1 row");
    let p: f64 = d1.split(',').nth(1).unwrap().parse().unwrap();
    assert!((p - 0.7805460697811408).abs() < 1e-12);
}

#[test]
fn json_output_carries_schema_and_config() {
    let out = run(&[
        "standard",
        "--n",
        "4",
        "--epsilon",
        "0.01",
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).expect("valid json");
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["config"]["command"], "standard");
    assert_eq!(doc["config"]["n"], 4);
    assert_eq!(doc["config"]["epsilon"], 0.01);
    let rows = doc["rows"].as_array().expect("rows array");
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["n_paths"], 4);
    assert!(rows[0]["detect_prob"].as_f64().unwrap() > 0.0);
}

#[test]
fn reruns_are_byte_identical() {
    let args = [
        "sweep",
        "--kind",
        "li",
        "--bit",
        "1",
        "--m-list",
        "16,8",
        "--n-list",
        "8",
        "--eps-list",
        "0.01,0.001",
        "--format",
        "json",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
}

#[test]
fn sweep_rows_are_sorted_and_deduplicated() {
    let out = run(&[
        "sweep",
        "--kind",
        "li",
        "--bit",
        "0",
        "--m-list",
        "8,4,8",
        "--n-list",
        "8",
        "--eps-list",
        "0.01,0.001",
    ]);
    assert!(out.status.success());
    let rows = csv_rows(&stdout(&out));
    let key: Vec<(u32, u32, String)> = rows
        .iter()
        .map(|r| {
            (
                r["m"].parse().unwrap(),
                r["n"].parse().unwrap(),
                r["epsilon"].clone(),
            )
        })
        .collect();
    assert_eq!(
        key,
        vec![
            (4, 8, "1e-3".to_string()),
            (4, 8, "1e-2".to_string()),
            (8, 8, "1e-3".to_string()),
            (8, 8, "1e-2".to_string()),
        ]
    );
    // Closed-form columns are filled for a kind that has them.
    assert!(!rows[0]["asym_trace"].is_empty());
    assert!(!rows[0]["asym_shift"].is_empty());
}

#[test]
fn sweep_warns_outside_the_formula_regime() {
    let out = run(&[
        "sweep",
        "--kind",
        "li",
        "--bit",
        "0",
        "--m-list",
        "4",
        "--n-list",
        "8",
        "--eps-list",
        "0.01",
    ]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("outside its regime"));
}

#[test]
fn config_file_drives_a_run_and_flags_override_it() {
    let dir = tempdir("cfg");
    let cfg = dir.join("run.cfg");
    std::fs::write(
        &cfg,
        "# comparison point\nkind = salih\nm = 8\nn = 16\nbit = 1\nepsilon = 0.001\n",
    )
    .unwrap();
    let out = run(&["compare", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let rows = csv_rows(&stdout(&out));
    assert_eq!(rows[0]["n"], "16");
    assert_eq!(rows[0]["verdict"], "counterfactual");
    assert_eq!(f(&rows[0], "trace_detect_prob"), 0.0);

    let out = run(&["compare", "--config", cfg.to_str().unwrap(), "--bit", "0"]);
    assert!(out.status.success());
    let rows = csv_rows(&stdout(&out));
    assert_eq!(rows[0]["bit"], "0");
    assert_ne!(f(&rows[0], "trace_detect_prob"), 0.0);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempdir("badcfg");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "kind = zeno\nn = 10\nepsilon = 0.01\nrounds = 5\n").unwrap();
    let out = run(&["trace", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown config key `rounds`"));
}

#[test]
fn out_files_land_in_the_output_dir() {
    let dir = tempdir("outdir");
    let out = bin()
        .args([
            "standard",
            "--n",
            "2",
            "--epsilon",
            "0.3",
            "--out",
            "std.csv",
        ])
        .env("CFTRACE_OUT_DIR", &dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(out.stdout.is_empty());
    let written = std::fs::read_to_string(dir.join("std.csv")).unwrap();
    assert!(written.starts_with("n_paths,"));
    assert_eq!(written.lines().count(), 2);
}

#[test]
fn failed_runs_leave_no_output_file() {
    let dir = tempdir("nofile");
    let out = bin()
        .args([
            "trace",
            "--kind",
            "nested3",
            "--element",
            "1,1=shutter",
            "--epsilon",
            "0.1",
            "--out",
            "never.csv",
        ])
        .env("CFTRACE_OUT_DIR", &dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let leftovers: Vec<_> = std::fs::read_dir(&dir).unwrap().collect();
    assert!(leftovers.is_empty(), "leftover files: {leftovers:?}");
}

#[test]
fn keydist_is_seed_reproducible() {
    let args = ["keydist", "--rounds", "2000", "--seed", "9", "--eve"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let rows = csv_rows(&stdout(&a));
    let clicked: u64 = rows[0]["clicked_announced"].parse().unwrap();
    let clicked_err: u64 = rows[0]["clicked_announced_errors"].parse().unwrap();
    assert_eq!(clicked, clicked_err);
}

#[test]
fn eve_needs_exactly_one_location() {
    let none = run(&["eve", "--kind", "zeno", "--n", "5"]);
    assert_eq!(none.status.code(), Some(2));
    let both = run(&[
        "eve",
        "--kind",
        "zeno",
        "--n",
        "5",
        "--eve-gap",
        "1",
        "--eve-path",
        "1,1",
    ]);
    assert_eq!(both.status.code(), Some(2));
    let one = run(&["eve", "--kind", "zeno", "--n", "5", "--eve-gap", "1"]);
    assert!(one.status.success(), "stderr: {}", stderr(&one));
}

#[test]
fn bohm_flags_approximate_kinds_on_stderr() {
    let rough = run(&["bohm", "--kind", "salih", "--m", "4", "--n", "8"]);
    assert!(rough.status.success());
    assert!(stderr(&rough).contains("sketch"));
    let exact = run(&["bohm", "--kind", "li", "--m", "4", "--n", "8"]);
    assert!(exact.status.success());
    assert!(!stderr(&exact).contains("sketch"));
}

/// Per-test scratch directory under the target tmpdir.
fn tempdir(tag: &str) -> std::path::PathBuf {
    let dir =
        Path::new(env!("CARGO_TARGET_TMPDIR")).join(format!("cli-{tag}-{}", std::process::id()));
    if dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
