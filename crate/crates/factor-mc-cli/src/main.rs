//! Command-line front end: config parsing, experiment dispatch and file
//! output.
//!
//! Exit codes: 0 on success, 1 for usage and configuration errors, 2 for
//! runtime failures.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use factor_mc::dgp;
use factor_mc::experiments::report::{self, StudyReport};
use factor_mc::experiments::{self, ExperimentConfig};
use factor_mc::stats::compute_statistics;
use factor_mc::two_step::{self, TwoStepConfig};

/// Environment variable providing the default output directory.
const OUTPUT_DIR_VAR: &str = "FACTOR_MC_OUT";

#[derive(Parser, Debug)]
#[command(
    name = "factor-mc",
    version,
    about = "Monte Carlo studies of panel statistics under weak factor structure"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat key=value config file (keys: n, t, c_pi, c_fv, reps, boot_reps,
    /// seed, levels, freeze_units).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override one config key after the file is read. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Output directory. Defaults to $FACTOR_MC_OUT, then ./out.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Cap on worker threads. Results never depend on it.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one panel; dump its errors and per-unit statistics as CSV.
    Simulate {
        /// Replication index to simulate.
        #[arg(long, default_value_t = 0)]
        rep: u64,
    },
    /// Null-distribution study: moments and right tail of both aggregate
    /// components, one row per factor strength.
    DistTable,
    /// Size and power study of the asymptotic and wild-bootstrap tests over
    /// the parameter grid.
    SizePower,
    /// Empirical variance of the aggregates against the theoretical targets
    /// and the plug-in estimator.
    VarianceCheck,
    /// Two-step estimators on the demonstration design, with wild-bootstrap
    /// confidence intervals.
    TwoStep {
        /// True second-step parameter of the demonstration design.
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Confidence interval level (two-sided).
        #[arg(long, default_value_t = 0.05)]
        level: f64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not usage errors.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    if cli.threads == Some(0) {
        eprintln!("error: --threads must be positive");
        return ExitCode::from(1);
    }

    let experiment = match config::parse_config(cli.config.as_deref(), &cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };

    let out_dir = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_DIR_VAR).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    let run = || dispatch(&cli.command, &experiment, &out_dir);
    let result = match cli.threads {
        Some(threads) => match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(run),
            Err(e) => Err(anyhow::anyhow!("cannot build thread pool: {e}")),
        },
        None => run(),
    };

    match result {
        Ok(()) => ExitCode::from(0),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(
    command: &Command,
    experiment: &ExperimentConfig,
    out_dir: &Path,
) -> anyhow::Result<()> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    match command {
        Command::Simulate { rep } => simulate(experiment, *rep, out_dir),
        Command::DistTable => dist_table(experiment, out_dir),
        Command::SizePower => size_power(experiment, out_dir),
        Command::VarianceCheck => variance_check(experiment, out_dir),
        Command::TwoStep { lambda, level } => two_step_cmd(experiment, *lambda, *level, out_dir),
    }
}

fn write(out_dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    let path = out_dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn simulate(experiment: &ExperimentConfig, rep: u64, out_dir: &Path) -> anyhow::Result<()> {
    // A single panel uses the first grid entries.
    let cell = experiment.cell_config(
        0,
        experiment.factor_strength_grid[0],
        experiment.common_dependence_grid[0],
    );
    let panel = dgp::simulate_panel(&cell, rep)?;
    let stats = compute_statistics(&panel);
    write(out_dir, "panel.csv", &report::panel_csv(&panel))?;
    write(out_dir, "xi.csv", &report::unit_statistics_csv(&stats))?;
    let report = StudyReport::new(
        "simulate",
        experiment,
        serde_json::json!({
            "rep": rep,
            "aggregate_linear": stats.aggregate.linear,
            "aggregate_quadratic": stats.aggregate.quadratic,
        }),
    );
    write(out_dir, "report.json", &report.to_json())?;
    println!(
        "panel {}x{}: aggregate linear {:.6}, quadratic {:.6}",
        panel.n_units(),
        panel.n_periods(),
        stats.aggregate.linear,
        stats.aggregate.quadratic
    );
    Ok(())
}

fn dist_table(experiment: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<()> {
    let rows = experiments::run_distribution_study(experiment)?;
    write(out_dir, "table1.csv", &report::distribution_csv(&rows))?;
    let study = StudyReport::new("dist-table", experiment, &rows);
    write(out_dir, "report.json", &study.to_json())?;
    print!("{}", report::render_distribution_table(&rows));
    Ok(())
}

fn size_power(experiment: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<()> {
    let table = experiments::run_size_power_study(experiment)?;
    write(out_dir, "table2.csv", &report::rejection_csv(&table))?;
    let study = StudyReport::new("size-power", experiment, &table);
    write(out_dir, "report.json", &study.to_json())?;
    print!("{}", report::render_rejection_table(&table));
    Ok(())
}

fn variance_check(experiment: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<()> {
    let rows = experiments::variance_check(experiment)?;
    write(
        out_dir,
        "variance_check.csv",
        &report::variance_check_csv(&rows),
    )?;
    let study = StudyReport::new("variance-check", experiment, &rows);
    write(out_dir, "report.json", &study.to_json())?;
    print!("{}", report::render_variance_table(&rows));
    Ok(())
}

fn two_step_cmd(
    experiment: &ExperimentConfig,
    lambda: f64,
    level: f64,
    out_dir: &Path,
) -> anyhow::Result<()> {
    let base = experiment.cell_config(
        0,
        experiment.factor_strength_grid[0],
        experiment.common_dependence_grid[0],
    );
    let cfg = TwoStepConfig { base, lambda };
    let panel = two_step::simulate_asset_panel(&cfg, 0)?;
    let estimates = two_step::lambda_estimates(&panel)?;
    let intervals = two_step::bootstrap_lambda_intervals(
        &panel,
        experiment.n_boot,
        cfg.base.master_seed,
        level,
    )?;
    let study = StudyReport::new(
        "two-step",
        experiment,
        serde_json::json!({
            "lambda_true": lambda,
            "interval_level": level,
            "estimates": estimates,
            "intervals": intervals,
        }),
    );
    write(out_dir, "twostep.json", &study.to_json())?;
    println!("lambda (true {lambda}):");
    println!(
        "  weighted average  {:<12} [{}, {}]",
        report::sig(estimates.weighted_average, 6),
        report::sig(intervals.weighted_average.lower, 6),
        report::sig(intervals.weighted_average.upper, 6),
    );
    println!(
        "  two-pass          {:<12} [{}, {}]",
        report::sig(estimates.fama_macbeth, 6),
        report::sig(intervals.fama_macbeth.lower, 6),
        report::sig(intervals.fama_macbeth.upper, 6),
    );
    println!(
        "  split-sample IV   {:<12} [{}, {}]",
        report::sig(estimates.split_sample_iv, 6),
        report::sig(intervals.split_sample_iv.lower, 6),
        report::sig(intervals.split_sample_iv.upper, 6),
    );
    Ok(())
}
