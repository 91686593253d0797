//! Runs the `tsac` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tsac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsac"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const CONFIG: &str = r#"
channel_model = "geometric"
methods = ["ARV_TSAC", "SVD_DFT", "SVD"]
metric = "MI"
sweep_variable = "snr_db"
sweep_values = [-10.0, 10.0]
n_trials = 4
master_seed = 9
theory_overlays = ["EQ13"]

[fixed_params]
n_antennas = 16
n_rf = 6
n_users = 2
mean_paths = 2.0
bits = 3
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("cfg.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn theory_eq14_prints_the_homogeneous_optimum() {
    let o = tsac(&[
        "theory", "eq14", "--nu", "2", "--nrf", "4", "--lambda", "4", "--snr-db", "0", "--bits",
        "2",
    ]);
    assert!(o.status.success());
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 3.896).abs() < 1e-3, "{v}");
}

#[test]
fn theory_formulas_and_infinite_bits() {
    let value = |args: &[&str]| -> f64 { stdout(&tsac(args)).trim().parse().unwrap() };
    assert!((value(&["theory", "eq13", "--nu", "8", "--bits", "2"]) - 24.71).abs() < 0.01);
    assert_eq!(
        value(&["theory", "lemma1", "--nr", "16", "--nrf", "8"]),
        64.0
    );
    assert_eq!(
        value(&["theory", "lemma2", "--nr", "16", "--nrf", "8", "--nu", "3"]),
        64.0
    );
    let common = [
        "--nu", "4", "--nrf", "16", "--nr", "64", "--l", "8", "--snr-db", "-5",
    ];
    let two = value(&[&["theory", "eq29", "--bits", "inf"], &common[..]].concat());
    let one = value(&[&["theory", "eq31", "--bits", "inf"], &common[..]].concat());
    assert!((two - one).abs() < 1e-9);
    let two = value(&[&["theory", "eq29", "--bits", "1"], &common[..]].concat());
    let one = value(&[&["theory", "eq31", "--bits", "1"], &common[..]].concat());
    assert!(two > one);

    let o = tsac(&["theory", "eq13", "--nu", "8", "--bits", "inf"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("inf"));
}

#[test]
fn theory_missing_parameter_is_an_argument_error() {
    let o = tsac(&["theory", "eq29", "--nu", "2", "--bits", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--"));
}

#[test]
fn unknown_flags_are_rejected() {
    for args in [
        &["theory", "eq14", "--frobnicate", "1"][..],
        &["preset", "fig_mi_vs_snr", "--out", "x.csv", "--fast"][..],
        &["validate", "--verbose"][..],
        &["run", "--config", "a.toml", "--out", "b.csv", "--extra"][..],
    ] {
        assert_eq!(tsac(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn help_lists_every_flag() {
    let cases: [(&str, &[&str]); 4] = [
        ("run", &["--config", "--out", "--threads"]),
        ("preset", &["--scale", "--out", "--trials", "--threads"]),
        (
            "theory",
            &[
                "--nu", "--nrf", "--nr", "--lambda", "--l", "--snr-db", "--bits",
            ],
        ),
        ("validate", &["--samples", "--seed", "--threads"]),
    ];
    for (sub, flags) in cases {
        let o = tsac(&[sub, "--help"]);
        assert!(o.status.success());
        let text = stdout(&o);
        for flag in flags {
            assert!(text.contains(flag), "{sub} --help lacks {flag}");
        }
    }
}

#[test]
fn paper_preset_writes_its_system_size() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = tsac(&[
        "preset",
        "fig_rate_vs_snr",
        "--scale",
        "paper",
        "--trials",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6 * 5);
    for r in &rows {
        assert_eq!(
            (r[col("n_r")], r[col("n_rf")], r[col("n_u")], r[col("bits")]),
            ("128", "43", "8", "2")
        );
        assert_eq!(r[col("metric")], "SUM_RATE");
    }
    // The summary table goes to stdout with three decimals.
    assert!(stdout(&o).contains(" ± "));
}

#[test]
fn unknown_preset_is_an_argument_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = tsac(&["preset", "fig_nothing", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fig_mi_vs_snr"));
    assert!(!out.exists());
}

#[test]
fn run_is_byte_identical_across_invocations_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = tsac(&[
            "run",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out).unwrap()
    };
    let a = run("a.csv", "1");
    let b = run("b.csv", "1");
    let c = run("c.csv", "2");
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 1 + 2 * 4);
}

#[test]
fn infeasible_run_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("n_users = 2", "n_users = 7"));
    let out = dir.path().join("r.csv");
    let o = tsac(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_users"));
    assert!(!out.exists());
}

#[test]
fn malformed_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("n_trials = 4", "n_trails = 4"));
    let out = dir.path().join("r.csv");
    let o = tsac(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_trails"));
    assert!(!out.exists());
}

#[test]
fn validate_reports_each_identity() {
    let o = tsac(&["validate", "--samples", "20000", "--seed", "5"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("PASS") || l.starts_with("FAIL"))
        .collect();
    assert_eq!(lines.len(), 16);
    assert!(lines.iter().all(|l| l.starts_with("PASS")));
}

#[test]
fn validate_with_too_few_samples_is_an_argument_error() {
    assert_eq!(
        tsac(&["validate", "--samples", "10"]).status.code(),
        Some(2)
    );
}
