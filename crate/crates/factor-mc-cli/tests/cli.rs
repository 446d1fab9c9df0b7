//! End-to-end tests of the command-line interface.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_factor-mc"))
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.cfg");
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn factor-mc")
}

const SMALL: &str =
    "n=16\nt=12\nc_pi=0.5,1\nc_fv=0\nreps=40\nboot_reps=39\nseed=11\nlevels=0.05,0.10\n";

#[test]
fn dist_table_writes_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = run(&[
        "dist-table",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("out/table1.csv").exists());
    assert!(dir.path().join("out/report.json").exists());
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("c_pi"), "{table}");
}

#[test]
fn size_power_outputs_are_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut csvs = Vec::new();
    for (sub, threads) in [("a", "1"), ("b", "2"), ("c", "1")] {
        let out_dir = dir.path().join(sub);
        let out = run(&[
            "size-power",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert!(
            out.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        csvs.push(std::fs::read(out_dir.join("table2.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_eq!(csvs[0], csvs[2]);
}

#[test]
fn report_embeds_config_that_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_a = dir.path().join("a");
    assert!(run(&[
        "size-power",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_a.to_str().unwrap(),
    ])
    .status
    .success());

    // Extract the embedded flat config and rerun from it.
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_a.join("report.json")).unwrap()).unwrap();
    let embedded = report["config_file"].as_str().unwrap();
    let cfg_b = write_config(&dir.path().join("."), embedded);
    let out_b = dir.path().join("b");
    assert!(run(&[
        "size-power",
        "--config",
        cfg_b.to_str().unwrap(),
        "--out",
        out_b.to_str().unwrap(),
    ])
    .status
    .success());
    assert_eq!(
        std::fs::read(out_a.join("table2.csv")).unwrap(),
        std::fs::read(out_b.join("table2.csv")).unwrap()
    );
}

#[test]
fn invalid_dependence_bound_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c_fv=1.5\n");
    let out = run(&["dist-table", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("c_fv"), "{stderr}");
    assert!(stderr.contains("[-1, 1]"), "{stderr}");
}

#[test]
fn too_few_bootstrap_replicates_cites_the_precondition() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "boot_reps=5\nlevels=0.05\n");
    let out = run(&["size-power", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("order statistic"), "{stderr}");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = run(&["dist-table", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_dumps_panel_and_unit_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "simulate",
        "--rep",
        "3",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let panel = std::fs::read_to_string(out_dir.join("panel.csv")).unwrap();
    // One row per unit, one column per period.
    assert_eq!(panel.lines().count(), 16);
    assert_eq!(panel.lines().next().unwrap().split(',').count(), 12);
    let xi = std::fs::read_to_string(out_dir.join("xi.csv")).unwrap();
    assert_eq!(xi.lines().next().unwrap(), "unit,xi_linear,xi_quadratic");
    assert_eq!(xi.lines().count(), 17);
}

#[test]
fn variance_check_and_two_step_run_clean() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "n=24\nt=20\nc_pi=0.5\nreps=60\nboot_reps=79\nseed=3\nlevels=0.05,0.10\n",
    );
    let out_dir = dir.path().join("vc");
    let out = run(&[
        "variance-check",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out_dir.join("variance_check.csv").exists());

    let ts_dir = dir.path().join("ts");
    let out = run(&[
        "two-step",
        "--lambda",
        "1.0",
        "--level",
        "0.10",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        ts_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ts_dir.join("twostep.json")).unwrap())
            .unwrap();
    assert!(report["results"]["estimates"]["fama_macbeth"].is_number());
    assert!(report["results"]["intervals"]["split_sample_iv"]["lower"].is_number());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("two-pass"), "{stdout}");
}

#[test]
fn output_dir_falls_back_to_environment_variable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let env_out = dir.path().join("env_out");
    let out = bin()
        .args(["dist-table", "--config", cfg.to_str().unwrap()])
        .env("FACTOR_MC_OUT", env_out.to_str().unwrap())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(env_out.join("table1.csv").exists());
}
