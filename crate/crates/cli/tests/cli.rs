//! End-to-end tests of the `dslab` binary: exit codes, file outputs,
//! config-file handling, and byte-level determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_dslab")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dslab-cli-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_in(out: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

const TINY: &[&str] = &[
    "--grid", "20", "--t-max", "4", "--ensemble", "4", "--steps", "384", "--band", "6",
];

#[test]
fn check_exponents_admissible_prints_weights() {
    let out = tmp_dir("exp-ok");
    let o = run_in(&out, &["check-exponents", "5", "10", "1", "3"]);
    assert!(o.status.success(), "{o:?}");
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("admissible"));
    assert!(stdout.contains("5/2"));
    assert!(stdout.contains("-7/2"));
    let csv = std::fs::read_to_string(out.join("check_exponents.csv")).unwrap();
    assert!(csv.starts_with("row,p,q,s,n,verdict"));
    assert!(csv.trim_end().ends_with("3"));
    assert!(out.join("check_exponents_summary.json").exists());
}

#[test]
fn check_exponents_violation_exits_one_naming_the_relation() {
    let out = tmp_dir("exp-bad");
    let o = run_in(&out, &["check-exponents", "2", "2", "0", "3"]);
    assert_eq!(o.status.code(), Some(1));
    let stderr = String::from_utf8(o.stderr).unwrap();
    assert!(stderr.contains("scaling"), "stderr: {stderr}");
}

#[test]
fn verify_strichartz_is_byte_deterministic() {
    let out_a = tmp_dir("det-a");
    let out_b = tmp_dir("det-b");
    let mut args = vec!["verify-strichartz", "--chart", "desitter", "--n", "3", "--seed", "7"];
    args.extend_from_slice(TINY);
    let a = run_in(&out_a, &args);
    let b = run_in(&out_b, &args);
    assert!(a.status.success(), "{a:?}");
    assert!(b.status.success(), "{b:?}");
    let csv_a = std::fs::read(out_a.join("verify_strichartz.csv")).unwrap();
    let csv_b = std::fs::read(out_b.join("verify_strichartz.csv")).unwrap();
    assert_eq!(csv_a, csv_b, "identical config+seed must give identical bytes");
    let sum_a = std::fs::read(out_a.join("verify_strichartz_summary.json")).unwrap();
    let sum_b = std::fs::read(out_b.join("verify_strichartz_summary.json")).unwrap();
    assert_eq!(sum_a, sum_b);
}

#[test]
fn inhomogeneous_run_with_default_dual() {
    let out = tmp_dir("inhom");
    let mut args = vec![
        "verify-strichartz", "--chart", "desitter", "--n", "3", "--inhomogeneous",
    ];
    args.extend_from_slice(TINY);
    let o = run_in(&out, &args);
    assert!(o.status.success(), "{o:?}");
    let csv = std::fs::read_to_string(out.join("verify_strichartz.csv")).unwrap();
    assert!(csv.lines().count() >= 6, "4 runs + header + summary");
}

#[test]
fn custom_chart_config_round_trips() {
    let out = tmp_dir("config");
    let config = out.join("chart.json");
    std::fs::write(
        &config,
        r#"{
            "chart": "custom",
            "n": 3,
            "grid": 20,
            "x0": 1.0,
            "x_min": 0.02,
            "cross_section": "sphere",
            "c0": 1.0,
            "h1": { "powers": [ { "power": 0, "coef": 0.25 } ] }
        }"#,
    )
    .unwrap();
    let o = run_in(
        &out,
        &[
            "conjugation-test",
            "--config",
            config.to_str().unwrap(),
            "--grids",
            "20",
        ],
    );
    assert!(o.status.success(), "{o:?}");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let out = tmp_dir("badkey");
    let config = out.join("chart.json");
    std::fs::write(
        &config,
        r#"{ "chart": "desitter", "n": 3, "grid": 20, "unknown_key": 1 }"#,
    )
    .unwrap();
    let o = run_in(
        &out,
        &["solve", "--config", config.to_str().unwrap(), "--steps", "64"],
    );
    assert_eq!(o.status.code(), Some(1), "{o:?}");
}

#[test]
fn malformed_config_exits_one() {
    let out = tmp_dir("malformed");
    let config = out.join("chart.json");
    std::fs::write(&config, "{ not json").unwrap();
    let o = run_in(&out, &["solve", "--config", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn semilinear_needs_a_data_size() {
    let out = tmp_dir("semi-noeps");
    let o = run_in(&out, &["semilinear", "--chart", "desitter", "--n", "3", "--grid", "20"]);
    assert_eq!(o.status.code(), Some(1));

    let o = run_in(
        &out,
        &[
            "semilinear", "--chart", "desitter", "--n", "3", "--grid", "20",
            "--t-max", "4", "--epsilon", "0.05", "--steps", "256",
        ],
    );
    assert!(o.status.success(), "{o:?}");
    let csv = std::fs::read_to_string(out.join("semilinear.csv")).unwrap();
    assert!(csv.starts_with("m,z_norm,diff"));
    assert!(csv.contains("true"));
}

#[test]
fn refinement_sweep_writes_gnuplot_columns() {
    let out = tmp_dir("refine");
    let o = run_in(
        &out,
        &[
            "verify-energy", "--chart", "desitter", "--n", "3", "--grid", "16",
            "--t-max", "4", "--ensemble", "3", "--steps", "256", "--band", "5",
            "--refine",
        ],
    );
    assert!(o.status.success(), "{o:?}");
    let dat = std::fs::read_to_string(out.join("verify_energy_refinement.dat")).unwrap();
    let lines: Vec<&str> = dat.lines().collect();
    assert_eq!(lines.len(), 2);
    for line in lines {
        assert_eq!(line.split_whitespace().count(), 2);
    }
    let summary = std::fs::read_to_string(out.join("verify_energy_summary.json")).unwrap();
    assert!(summary.contains("refinement_change_le_10_percent"));
}

#[test]
fn injected_linear_chart_is_flagged_in_the_summary() {
    let out = tmp_dir("inject");
    let mut args = vec![
        "verify-strichartz", "--chart", "desitter", "--n", "3",
        "--inject-linear", "1.0",
    ];
    args.extend_from_slice(TINY);
    let o = run_in(&out, &args);
    assert!(o.status.success(), "{o:?}");
    let summary = std::fs::read_to_string(out.join("verify_strichartz_summary.json")).unwrap();
    assert!(summary.contains("singular-potential warning"));
}

#[test]
fn out_env_var_sets_default_directory() {
    let out = tmp_dir("envvar");
    let o = Command::new(bin())
        .args(["check-exponents", "inf", "2", "0", "4"])
        .env("DSLAB_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{o:?}");
    assert!(out.join("check_exponents.csv").exists());
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("sup"), "p = inf weights degenerate to sup: {stdout}");
}

#[test]
fn help_documents_every_subcommand() {
    let o = Command::new(bin()).arg("--help").output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for sub in [
        "check-exponents",
        "conjugation-test",
        "solve",
        "verify-energy",
        "verify-strichartz",
        "semilinear",
    ] {
        assert!(text.contains(sub), "help missing {sub}");
    }
}
