//! Monte Carlo experiment orchestration.
//!
//! Three studies are provided: the null-distribution study (moments and
//! tails of the aggregate statistic), the size and power study of the three
//! tests over a parameter grid, and the variance check that compares
//! empirical aggregate variances against their theoretical targets and the
//! plug-in estimator.
//!
//! Replications are the unit of parallel work. Each replication derives its
//! substream from `(master_seed, cell_id, rep_index)` and results are
//! collected by replication index, so reports are bit-identical for any
//! thread count or scheduling.

pub mod report;
pub mod summary;

use rayon::prelude::*;
use serde::Serialize;

use crate::accum;
use crate::dgp::{self, SimConfig};
use crate::error::{Error, Result};
use crate::inference::{run_bootstrap, test_asymptotic, test_bootstrap, TestMethod};
use crate::rng;
use crate::stats::{compute_statistics, variance_estimate, Component, ComponentPair};

pub use summary::{summarize_moments, DistributionSummary};

/// Desk-scale defaults: panels of 200 by 200, 2000 replications, 400
/// bootstrap replicates.
pub const DESK_N_UNITS: usize = 200;
pub const DESK_N_PERIODS: usize = 200;
pub const DESK_N_REPS: usize = 2000;
pub const DESK_N_BOOT: usize = 400;

/// Grid-based experiment configuration.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub base: SimConfig,
    pub factor_strength_grid: Vec<f64>,
    pub common_dependence_grid: Vec<f64>,
    pub n_reps: usize,
    pub n_boot: usize,
    /// Test levels, sorted ascending.
    pub levels: Vec<f64>,
    pub freeze_units: bool,
}

impl ExperimentConfig {
    /// Desk-scale defaults around a base seed.
    pub fn desk_scale(master_seed: u64) -> Self {
        let mut base = SimConfig::new(DESK_N_UNITS, DESK_N_PERIODS);
        base.master_seed = master_seed;
        Self {
            base,
            factor_strength_grid: vec![0.5, 1.0, 2.0],
            common_dependence_grid: vec![0.0],
            n_reps: DESK_N_REPS,
            n_boot: DESK_N_BOOT,
            levels: vec![0.01, 0.05, 0.10],
            freeze_units: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.factor_strength_grid.is_empty() || self.common_dependence_grid.is_empty() {
            return Err(Error::InvalidArgument(
                "experiments: parameter grids must be non-empty".into(),
            ));
        }
        if self.factor_strength_grid.iter().any(|c| *c < 0.0) {
            return Err(Error::InvalidArgument(
                "experiments: factor strengths must be >= 0".into(),
            ));
        }
        if self.common_dependence_grid.iter().any(|c| c.abs() > 1.0) {
            return Err(Error::InvalidArgument(
                "experiments: common dependence values must lie in [-1, 1]".into(),
            ));
        }
        if self.n_reps == 0 {
            return Err(Error::InvalidArgument(
                "experiments: n_reps must be positive".into(),
            ));
        }
        if self.levels.is_empty() || self.levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return Err(Error::InvalidArgument(
                "experiments: levels must be non-empty and lie in (0, 1)".into(),
            ));
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "experiments: levels must be sorted ascending".into(),
            ));
        }
        let smallest = self.levels[0];
        let required = (1.0 / smallest).ceil() as usize - 1;
        if self.n_boot < required {
            return Err(Error::InvalidArgument(format!(
                "experiments: boot_reps = {} cannot resolve the {smallest} level; the \
                 ceil((1-level)(B+1)) order statistic needs at least {required}",
                self.n_boot
            )));
        }
        Ok(())
    }

    /// Simulation config of one grid cell. The cell id is mixed into the
    /// master seed so every cell draws from its own family of substreams.
    pub fn cell_config(
        &self,
        cell_id: u64,
        factor_strength: f64,
        common_dependence: f64,
    ) -> SimConfig {
        let mut cfg = self.base.clone();
        cfg.factor_strength = factor_strength;
        cfg.common_dependence = common_dependence;
        cfg.master_seed = rng::mix64(self.base.master_seed, cell_id);
        cfg.freeze_units = self.freeze_units;
        cfg
    }
}

/// Runs replications in parallel, collecting results in replication order.
fn collect_reps<T: Send>(n_reps: usize, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    (0..n_reps as u64).into_par_iter().map(&f).collect()
}

/// One row of the null-distribution table.
#[derive(Clone, Debug, Serialize)]
pub struct DistributionRow {
    pub factor_strength: f64,
    pub linear: DistributionSummary,
    pub quadratic: DistributionSummary,
}

/// Simulates the aggregate statistic under the null and summarizes its
/// marginal distributions, one row per factor strength.
pub fn run_distribution_study(config: &ExperimentConfig) -> Result<Vec<DistributionRow>> {
    config.validate()?;
    if config.common_dependence_grid.iter().any(|c| *c != 0.0) {
        return Err(Error::InvalidArgument(
            "experiments: the distribution study is a null study; common dependence must be 0"
                .into(),
        ));
    }
    let mut rows = Vec::with_capacity(config.factor_strength_grid.len());
    for (idx, &strength) in config.factor_strength_grid.iter().enumerate() {
        let cell = config.cell_config(idx as u64, strength, 0.0);
        let aggregates: Vec<ComponentPair> = collect_reps(config.n_reps, |rep| {
            let panel = dgp::simulate_panel(&cell, rep)?;
            Ok(compute_statistics(&panel).aggregate)
        })?;
        let linear: Vec<f64> = aggregates.iter().map(|a| a.linear).collect();
        let quadratic: Vec<f64> = aggregates.iter().map(|a| a.quadratic).collect();
        rows.push(DistributionRow {
            factor_strength: strength,
            linear: summarize_moments(&linear)?,
            quadratic: summarize_moments(&quadratic)?,
        });
    }
    Ok(rows)
}

/// One rejection-rate cell of the size and power table.
#[derive(Clone, Debug, Serialize)]
pub struct RejectionRow {
    pub factor_strength: f64,
    pub common_dependence: f64,
    pub component: Component,
    pub method: TestMethod,
    pub level: f64,
    pub rate: f64,
    /// Binomial Monte Carlo standard error `sqrt(rate (1 - rate) / R)`.
    pub mc_stderr: f64,
    pub n_reps: usize,
}

/// Full rejection table with its grid layout.
#[derive(Clone, Debug, Serialize)]
pub struct RejectionTable {
    pub rows: Vec<RejectionRow>,
    pub factor_strength_grid: Vec<f64>,
    pub common_dependence_grid: Vec<f64>,
    pub levels: Vec<f64>,
    pub n_reps: usize,
}

impl RejectionTable {
    /// Looks up one cell.
    pub fn rate(
        &self,
        factor_strength: f64,
        common_dependence: f64,
        component: Component,
        method: TestMethod,
        level: f64,
    ) -> Option<&RejectionRow> {
        self.rows.iter().find(|r| {
            r.factor_strength == factor_strength
                && r.common_dependence == common_dependence
                && r.component == component
                && r.method == method
                && r.level == level
        })
    }
}

/// Per-replication rejection flags, laid out as
/// `component x method x level`.
struct RepDecisions {
    flags: Vec<bool>,
}

/// Runs the size and power study over the full parameter grid.
///
/// Each replication simulates a panel, computes the statistics, the plug-in
/// variance and the studentized aggregate, runs the wild bootstrap with
/// studentization, and applies all three tests at every level to both
/// components.
pub fn run_size_power_study(config: &ExperimentConfig) -> Result<RejectionTable> {
    config.validate()?;
    let levels = &config.levels;
    let per_rep = Component::ALL.len() * TestMethod::ALL.len() * levels.len();

    let mut rows = Vec::new();
    for (i_pi, &strength) in config.factor_strength_grid.iter().enumerate() {
        for (i_fv, &dependence) in config.common_dependence_grid.iter().enumerate() {
            let cell_id = (i_pi * config.common_dependence_grid.len() + i_fv) as u64;
            let cell = config.cell_config(cell_id, strength, dependence);
            let boot = config.n_boot;

            let decisions: Vec<RepDecisions> = collect_reps(config.n_reps, |rep| {
                let panel = dgp::simulate_panel(&cell, rep).map_err(|e| {
                    Error::InvalidArgument(format!(
                        "experiments: cell ({strength}, {dependence}) rep {rep}: {e}"
                    ))
                })?;
                let stats = compute_statistics(&panel);
                let var = variance_estimate(&stats);
                let boot_seed = rng::mix64(cell.master_seed, rep);
                let draws = run_bootstrap(&panel, boot, boot_seed, true)?;

                let mut flags = Vec::with_capacity(per_rep);
                for component in Component::ALL {
                    let observed = stats.aggregate.get(component);
                    let t_obs = var.t_stat(component)?;
                    let xi_values = draws.aggregate_values(component);
                    let t_values = draws.studentized_values(component)?;
                    for method in TestMethod::ALL {
                        for &level in levels {
                            let reject = match method {
                                TestMethod::AsymptoticT => test_asymptotic(t_obs, level)?.reject,
                                TestMethod::BootstrapXi => {
                                    test_bootstrap(observed, &xi_values, level)?.reject
                                }
                                TestMethod::BootstrapT => {
                                    test_bootstrap(t_obs, &t_values, level)?.reject
                                }
                            };
                            flags.push(reject);
                        }
                    }
                }
                Ok(RepDecisions { flags })
            })?;

            let mut counts = vec![0usize; per_rep];
            for rep in &decisions {
                for (c, &flag) in counts.iter_mut().zip(&rep.flags) {
                    *c += flag as usize;
                }
            }
            let r = config.n_reps as f64;
            let mut slot = 0;
            for component in Component::ALL {
                for method in TestMethod::ALL {
                    for &level in levels {
                        let rate = counts[slot] as f64 / r;
                        rows.push(RejectionRow {
                            factor_strength: strength,
                            common_dependence: dependence,
                            component,
                            method,
                            level,
                            rate,
                            mc_stderr: (rate * (1.0 - rate) / r).sqrt(),
                            n_reps: config.n_reps,
                        });
                        slot += 1;
                    }
                }
            }
        }
    }
    Ok(RejectionTable {
        rows,
        factor_strength_grid: config.factor_strength_grid.clone(),
        common_dependence_grid: config.common_dependence_grid.clone(),
        levels: config.levels.clone(),
        n_reps: config.n_reps,
    })
}

/// Comparison of empirical aggregate variances with theory and with the
/// plug-in estimator, for one factor strength under the null.
#[derive(Clone, Debug, Serialize)]
pub struct VarianceCheckRow {
    pub factor_strength: f64,
    pub component: Component,
    /// Variance of the aggregate across replications.
    pub empirical_var: f64,
    /// Replication average of the finite-sample theoretical target.
    pub theoretical_var: f64,
    /// Replication average of the plug-in variance estimate.
    pub mean_plugin_var: f64,
    /// `empirical_var / mean_plugin_var`; far above one flags plug-in
    /// inconsistency.
    pub emp_over_plugin: f64,
    pub n_reps: usize,
}

/// Runs the variance check under the null for every factor strength.
pub fn variance_check(config: &ExperimentConfig) -> Result<Vec<VarianceCheckRow>> {
    config.validate()?;
    if config.common_dependence_grid.iter().any(|c| *c != 0.0) {
        return Err(Error::InvalidArgument(
            "experiments: the variance check runs under the null; common dependence must be 0"
                .into(),
        ));
    }
    struct Rep {
        aggregate: ComponentPair,
        target: ComponentPair,
        plugin: ComponentPair,
    }
    let mut rows = Vec::new();
    for (idx, &strength) in config.factor_strength_grid.iter().enumerate() {
        let cell = config.cell_config(idx as u64, strength, 0.0);
        let reps: Vec<Rep> = collect_reps(config.n_reps, |rep| {
            let panel = dgp::simulate_panel(&cell, rep)?;
            let stats = compute_statistics(&panel);
            let var = variance_estimate(&stats);
            let targets = dgp::theoretical_moments(&panel.params, &cell);
            Ok(Rep {
                aggregate: stats.aggregate,
                target: ComponentPair {
                    linear: targets.linear_variance,
                    quadratic: targets.quadratic_variance,
                },
                plugin: ComponentPair {
                    linear: var.sigma_hat[0][0],
                    quadratic: var.sigma_hat[1][1],
                },
            })
        })?;
        for component in Component::ALL {
            let values: Vec<f64> = reps.iter().map(|r| r.aggregate.get(component)).collect();
            let targets: Vec<f64> = reps.iter().map(|r| r.target.get(component)).collect();
            let plugins: Vec<f64> = reps.iter().map(|r| r.plugin.get(component)).collect();
            let empirical_var = accum::sample_variance(&values);
            let mean_plugin_var = accum::mean(&plugins);
            rows.push(VarianceCheckRow {
                factor_strength: strength,
                component,
                empirical_var,
                theoretical_var: accum::mean(&targets),
                mean_plugin_var,
                emp_over_plugin: empirical_var / mean_plugin_var,
                n_reps: config.n_reps,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(seed: u64) -> ExperimentConfig {
        let mut base = SimConfig::new(16, 12);
        base.master_seed = seed;
        ExperimentConfig {
            base,
            factor_strength_grid: vec![0.5, 1.0],
            common_dependence_grid: vec![0.0],
            n_reps: 40,
            n_boot: 39,
            levels: vec![0.05, 0.10],
            freeze_units: false,
        }
    }

    #[test]
    fn validation_catches_bad_configs() {
        let mut c = tiny_config(1);
        c.levels = vec![0.10, 0.05];
        assert!(c.validate().is_err());
        c = tiny_config(1);
        c.n_boot = 10;
        assert!(c.validate().is_err());
        c = tiny_config(1);
        c.factor_strength_grid.clear();
        assert!(c.validate().is_err());
        c = tiny_config(1);
        c.common_dependence_grid = vec![1.5];
        assert!(c.validate().is_err());
        assert!(tiny_config(1).validate().is_ok());
    }

    #[test]
    fn distribution_study_requires_null_design() {
        let mut c = tiny_config(2);
        c.common_dependence_grid = vec![0.1];
        assert!(run_distribution_study(&c).is_err());
    }

    #[test]
    fn distribution_study_is_deterministic() {
        let c = tiny_config(3);
        let a = run_distribution_study(&c).unwrap();
        let b = run_distribution_study(&c).unwrap();
        assert_eq!(a.len(), 2);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.linear.mean.to_bits(), y.linear.mean.to_bits());
            assert_eq!(
                x.quadratic.kurtosis.to_bits(),
                y.quadratic.kurtosis.to_bits()
            );
        }
    }

    #[test]
    fn size_power_rates_are_probabilities_with_binomial_errors() {
        let mut c = tiny_config(4);
        c.common_dependence_grid = vec![0.0, 0.2];
        let table = run_size_power_study(&c).unwrap();
        // 2 strengths x 2 dependences x 2 components x 3 methods x 2 levels.
        assert_eq!(table.rows.len(), 48);
        for row in &table.rows {
            assert!((0.0..=1.0).contains(&row.rate));
            let se = (row.rate * (1.0 - row.rate) / row.n_reps as f64).sqrt();
            assert_eq!(row.mc_stderr, se);
        }
        assert!(table
            .rate(0.5, 0.0, Component::Linear, TestMethod::BootstrapXi, 0.05)
            .is_some());
    }

    #[test]
    fn size_power_is_deterministic_across_thread_counts() {
        let c = tiny_config(5);
        let run_in_pool = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| run_size_power_study(&c).unwrap())
        };
        let a = run_in_pool(1);
        let b = run_in_pool(4);
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.rate.to_bits(), y.rate.to_bits());
        }
    }

    #[test]
    fn variance_check_matches_targets_loosely_at_small_scale() {
        let mut c = tiny_config(6);
        c.base = SimConfig::new(50, 50);
        c.base.master_seed = 6;
        c.factor_strength_grid = vec![0.0];
        c.n_reps = 400;
        let rows = variance_check(&c).unwrap();
        assert_eq!(rows.len(), 2);
        for row in rows {
            // Small-sample smoke check with wide bands.
            assert!(
                (row.empirical_var / row.theoretical_var - 1.0).abs() < 0.35,
                "{}: empirical {} vs target {}",
                row.component,
                row.empirical_var,
                row.theoretical_var
            );
            assert!(row.emp_over_plugin.is_finite());
        }
    }
}
