//! Report emission: CSV tables, JSON reports and aligned text tables.
//!
//! CSV floats use the shortest round-trip representation, so output is
//! byte-stable across runs and thread counts for a fixed configuration.

use serde::Serialize;

use crate::dgp::FactorPanel;
use crate::rng;
use crate::stats::UnitStatistics;

use super::{
    DistributionRow, DistributionSummary, ExperimentConfig, RejectionTable, VarianceCheckRow,
};

/// One grid cell's derived seed, recorded for provenance.
#[derive(Clone, Debug, Serialize)]
pub struct CellSeed {
    pub c_pi: f64,
    pub c_fv: f64,
    pub seed: u64,
}

/// JSON report wrapper: the resolved configuration, the seeds actually used,
/// and the study results.
#[derive(Clone, Debug, Serialize)]
pub struct StudyReport<T: Serialize> {
    pub command: String,
    pub config: ExperimentConfig,
    /// Flat key=value text of the resolved configuration; parsing it back
    /// reproduces the run.
    pub config_file: String,
    pub master_seed: u64,
    pub cell_seeds: Vec<CellSeed>,
    pub results: T,
}

impl<T: Serialize> StudyReport<T> {
    pub fn new(command: &str, config: &ExperimentConfig, results: T) -> Self {
        let grid_cells: Vec<CellSeed> = config
            .factor_strength_grid
            .iter()
            .enumerate()
            .flat_map(|(i_pi, &c_pi)| {
                config
                    .common_dependence_grid
                    .iter()
                    .enumerate()
                    .map(move |(i_fv, &c_fv)| {
                        let cell_id = (i_pi * config.common_dependence_grid.len() + i_fv) as u64;
                        (c_pi, c_fv, cell_id)
                    })
            })
            .map(|(c_pi, c_fv, cell_id)| CellSeed {
                c_pi,
                c_fv,
                seed: rng::mix64(config.base.master_seed, cell_id),
            })
            .collect();
        Self {
            command: command.to_string(),
            config: config.clone(),
            config_file: config_file_text(config),
            master_seed: config.base.master_seed,
            cell_seeds: grid_cells,
            results,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Canonical flat key=value text of a configuration. The config parser
/// accepts exactly this format, so reports round-trip.
pub fn config_file_text(config: &ExperimentConfig) -> String {
    let list = |values: &[f64]| {
        values
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    format!(
        "n={}\nt={}\nc_pi={}\nc_fv={}\nreps={}\nboot_reps={}\nseed={}\nlevels={}\nfreeze_units={}\n",
        config.base.n_units,
        config.base.n_periods,
        list(&config.factor_strength_grid),
        list(&config.common_dependence_grid),
        config.n_reps,
        config.n_boot,
        config.base.master_seed,
        list(&config.levels),
        config.freeze_units,
    )
}

/// Formats a float with the given number of significant digits.
pub fn sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - magnitude).clamp(0, 17) as usize;
    format!("{x:.decimals$}")
}

/// CSV of the null-distribution study, one row per (strength, component).
pub fn distribution_csv(rows: &[DistributionRow]) -> String {
    let mut out =
        String::from("c_pi,component,mean,skewness,kurtosis,right_quantile_5pct,n_samples\n");
    for row in rows {
        for (name, s) in [("linear", &row.linear), ("quadratic", &row.quadratic)] {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                row.factor_strength,
                name,
                s.mean,
                s.skewness,
                s.kurtosis,
                s.right_quantile_5pct,
                s.n_samples
            ));
        }
    }
    out
}

/// CSV of the size and power study, one row per table cell.
pub fn rejection_csv(table: &RejectionTable) -> String {
    let mut out = String::from("c_pi,c_fv,component,method,level,rate,mc_stderr\n");
    for row in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.factor_strength,
            row.common_dependence,
            row.component,
            row.method,
            row.level,
            row.rate,
            row.mc_stderr
        ));
    }
    out
}

/// CSV of the variance check, one row per (strength, component).
pub fn variance_check_csv(rows: &[VarianceCheckRow]) -> String {
    let mut out = String::from(
        "c_pi,component,empirical_var,theoretical_var,mean_plugin_var,emp_over_plugin,n_reps\n",
    );
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.factor_strength,
            row.component,
            row.empirical_var,
            row.theoretical_var,
            row.mean_plugin_var,
            row.emp_over_plugin,
            row.n_reps
        ));
    }
    out
}

/// CSV dump of a panel's errors: one row per unit, one column per period.
pub fn panel_csv(panel: &FactorPanel) -> String {
    let mut out = String::new();
    for i in 0..panel.n_units() {
        let row = panel.errors.row(i);
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// CSV of per-unit statistics.
pub fn unit_statistics_csv(stats: &UnitStatistics) -> String {
    let mut out = String::from("unit,xi_linear,xi_quadratic\n");
    for i in 0..stats.n_units() {
        out.push_str(&format!(
            "{},{},{}\n",
            i, stats.linear[i], stats.quadratic[i]
        ));
    }
    out
}

/// Aligned text table of the null-distribution study.
pub fn render_distribution_table(rows: &[DistributionRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>6} | {:^51} | {:^51}\n",
        "", "linear", "quadratic"
    ));
    let header = |_: ()| {
        format!(
            "{:>12} {:>12} {:>12} {:>12}",
            "mean", "skew", "kurt", "quant"
        )
    };
    out.push_str(&format!(
        "{:>6} | {} | {}\n",
        "c_pi",
        header(()),
        header(())
    ));
    for row in rows {
        let cells = |s: &DistributionSummary| {
            format!(
                "{:>12} {:>12} {:>12} {:>12}",
                sig(s.mean, 6),
                sig(s.skewness, 6),
                sig(s.kurtosis, 6),
                sig(s.right_quantile_5pct, 6)
            )
        };
        out.push_str(&format!(
            "{:>6} | {} | {}\n",
            sig(row.factor_strength, 3),
            cells(&row.linear),
            cells(&row.quadratic),
        ));
    }
    out
}

/// Aligned text table of rejection rates in percent, one panel per
/// dependence value, mirroring the size/power layout.
pub fn render_rejection_table(table: &RejectionTable) -> String {
    let short_method = |m: crate::inference::TestMethod| match m {
        crate::inference::TestMethod::AsymptoticT => "asy",
        crate::inference::TestMethod::BootstrapXi => "bxi",
        crate::inference::TestMethod::BootstrapT => "bt",
    };
    let mut out = String::new();
    for &c_fv in &table.common_dependence_grid {
        let panel_name = if c_fv == 0.0 { "Size" } else { "Power" };
        out.push_str(&format!("{panel_name}: c_fv = {c_fv}\n"));
        out.push_str(&format!("{:>6}", "c_pi"));
        for component in crate::stats::Component::ALL {
            for &level in &table.levels {
                for method in crate::inference::TestMethod::ALL {
                    let header = format!(
                        "{}/{}%/{}",
                        &component.as_str()[..3],
                        sig(100.0 * level, 3),
                        short_method(method)
                    );
                    out.push_str(&format!(" {header:>13}"));
                }
            }
        }
        out.push('\n');
        for &c_pi in &table.factor_strength_grid {
            out.push_str(&format!("{:>6}", sig(c_pi, 3)));
            for component in crate::stats::Component::ALL {
                for &level in &table.levels {
                    for method in crate::inference::TestMethod::ALL {
                        let cell = table
                            .rate(c_pi, c_fv, component, method, level)
                            .map(|r| sig(100.0 * r.rate, 6))
                            .unwrap_or_else(|| "-".into());
                        out.push_str(&format!(" {cell:>13}"));
                    }
                }
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

/// Aligned text table of the variance check.
pub fn render_variance_table(rows: &[VarianceCheckRow]) -> String {
    let mut out = format!(
        "{:>6} {:>10} {:>14} {:>14} {:>14} {:>14}\n",
        "c_pi", "component", "empirical", "theoretical", "mean_plugin", "emp/plugin"
    );
    for row in rows {
        out.push_str(&format!(
            "{:>6} {:>10} {:>14} {:>14} {:>14} {:>14}\n",
            sig(row.factor_strength, 3),
            row.component,
            sig(row.empirical_var, 6),
            sig(row.theoretical_var, 6),
            sig(row.mean_plugin_var, 6),
            sig(row.emp_over_plugin, 6),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::SimConfig;

    fn small_config() -> ExperimentConfig {
        let mut base = SimConfig::new(8, 10);
        base.master_seed = 11;
        ExperimentConfig {
            base,
            factor_strength_grid: vec![0.5],
            common_dependence_grid: vec![0.0],
            n_reps: 30,
            n_boot: 19,
            levels: vec![0.05],
            freeze_units: false,
        }
    }

    #[test]
    fn sig_formats_significant_digits() {
        assert_eq!(sig(41.3, 6), "41.3000");
        assert_eq!(sig(0.0525, 6), "0.0525000");
        assert_eq!(sig(3.01, 3), "3.01");
        assert_eq!(sig(0.0, 6), "0");
        assert_eq!(sig(-1.6449, 3), "-1.64");
    }

    #[test]
    fn config_text_round_trips_through_report() {
        let cfg = small_config();
        let text = config_file_text(&cfg);
        assert!(text.contains("n=8\n"));
        assert!(text.contains("c_pi=0.5\n"));
        assert!(text.contains("levels=0.05\n"));
        let report = StudyReport::new("size-power", &cfg, vec![1.0, 2.0]);
        let json = report.to_json();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["master_seed"], 11);
        assert_eq!(value["config_file"].as_str().unwrap(), text);
        assert_eq!(value["cell_seeds"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn csv_emission_is_deterministic() {
        let cfg = small_config();
        let a = super::super::run_size_power_study(&cfg).unwrap();
        let b = super::super::run_size_power_study(&cfg).unwrap();
        assert_eq!(rejection_csv(&a), rejection_csv(&b));
        let rendered = render_rejection_table(&a);
        assert!(rendered.contains("Size: c_fv = 0"));
    }
}
