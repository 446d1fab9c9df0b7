//! Two-step estimators on simulated asset panels.
//!
//! The first step runs per-unit time-series regressions; the second step
//! aggregates the per-unit estimates cross-sectionally. Three second-step
//! estimators are provided: a weighted average, a no-intercept
//! cross-sectional regression of average returns on slopes, and a
//! split-sample instrumental-variables ratio.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::accum::{self, Accumulator};
use crate::dgp::{self, SimConfig};
use crate::error::{Error, Result};
use crate::experiments::summary::quantile_sorted;
use crate::inference::rademacher_weights;
use crate::matrix::Matrix;
use crate::rng;

/// True parameters behind a simulated asset panel.
#[derive(Clone, Debug)]
pub struct PanelTruth {
    pub lambda: f64,
    pub beta: Vec<f64>,
}

/// Panel of excess returns with a single observed risk factor.
#[derive(Clone, Debug)]
pub struct AssetPanel {
    /// Returns r_it, one row per unit.
    pub returns: Matrix,
    /// Risk factor F_t.
    pub factor: Vec<f64>,
    /// Simulation truth; absent for panels built from data.
    pub truth: Option<PanelTruth>,
}

impl AssetPanel {
    pub fn new(returns: Matrix, factor: Vec<f64>, truth: Option<PanelTruth>) -> Result<Self> {
        if factor.len() != returns.cols() {
            return Err(Error::DimensionMismatch(format!(
                "two_step: factor has {} periods, returns have {}",
                factor.len(),
                returns.cols()
            )));
        }
        if let Some(t) = &truth {
            if t.beta.len() != returns.rows() {
                return Err(Error::DimensionMismatch(format!(
                    "two_step: {} true betas for {} units",
                    t.beta.len(),
                    returns.rows()
                )));
            }
        }
        Ok(Self {
            returns,
            factor,
            truth,
        })
    }

    pub fn n_units(&self) -> usize {
        self.returns.rows()
    }

    pub fn n_periods(&self) -> usize {
        self.returns.cols()
    }
}

/// Mask selecting the first half of the periods.
pub fn first_half_mask(n_periods: usize) -> Vec<bool> {
    (0..n_periods).map(|t| t < n_periods / 2).collect()
}

/// Mask selecting the second half of the periods.
pub fn second_half_mask(n_periods: usize) -> Vec<bool> {
    (0..n_periods).map(|t| t >= n_periods / 2).collect()
}

/// Per-unit OLS slope of returns on the factor over the masked periods.
///
/// No intercept is fitted; this matches the estimation-error structure the
/// statistic layer assumes. `None` masks the full sample.
pub fn first_pass(panel: &AssetPanel, mask: Option<&[bool]>) -> Result<Vec<f64>> {
    first_pass_impl(panel, mask, false)
}

/// Same as [`first_pass`] but with an intercept, for robustness checks.
pub fn first_pass_with_intercept(panel: &AssetPanel, mask: Option<&[bool]>) -> Result<Vec<f64>> {
    first_pass_impl(panel, mask, true)
}

fn first_pass_impl(panel: &AssetPanel, mask: Option<&[bool]>, intercept: bool) -> Result<Vec<f64>> {
    let t_len = panel.n_periods();
    if let Some(m) = mask {
        if m.len() != t_len {
            return Err(Error::DimensionMismatch(format!(
                "two_step: mask of length {} for {t_len} periods",
                m.len()
            )));
        }
    }
    let selected: Vec<usize> = (0..t_len)
        .filter(|&t| mask.map_or(true, |m| m[t]))
        .collect();
    if selected.len() < 2 {
        return Err(Error::DegenerateRegressor(format!(
            "two_step: first pass needs at least 2 masked periods, got {}",
            selected.len()
        )));
    }

    let nf = selected.len() as f64;
    let mut fsum = Accumulator::new();
    let mut fsq = Accumulator::new();
    for &t in &selected {
        fsum.add(panel.factor[t]);
        fsq.add(panel.factor[t] * panel.factor[t]);
    }
    let fmean = fsum.total() / nf;
    let mut dev_sq = Accumulator::new();
    for &t in &selected {
        let d = panel.factor[t] - fmean;
        dev_sq.add(d * d);
    }
    // A factor that is constant on the mask carries no regression signal,
    // with or without an intercept.
    let scale = fsq.total().max(1.0);
    if fsq.total() == 0.0 || dev_sq.total() <= 1e-20 * scale {
        return Err(Error::DegenerateRegressor(
            "two_step: factor has zero sample variance on the masked periods".into(),
        ));
    }

    let mut slopes = Vec::with_capacity(panel.n_units());
    for i in 0..panel.n_units() {
        let row = panel.returns.row(i);
        let mut cross = Accumulator::new();
        if intercept {
            let mut rsum = Accumulator::new();
            for &t in &selected {
                rsum.add(row[t]);
            }
            let rmean = rsum.total() / nf;
            for &t in &selected {
                cross.add((panel.factor[t] - fmean) * (row[t] - rmean));
            }
            slopes.push(cross.total() / dev_sq.total());
        } else {
            for &t in &selected {
                cross.add(panel.factor[t] * row[t]);
            }
            slopes.push(cross.total() / fsq.total());
        }
    }
    Ok(slopes)
}

/// Per-unit average returns.
pub fn mean_returns(panel: &AssetPanel) -> Vec<f64> {
    (0..panel.n_units())
        .map(|i| accum::mean(panel.returns.row(i)))
        .collect()
}

/// Weighted average of first-step estimates, `(1/N) sum_i gamma_i beta_i`.
pub fn weighted_average_estimator(weights: &[f64], estimates: &[f64]) -> Result<f64> {
    if weights.len() != estimates.len() {
        return Err(Error::DimensionMismatch(format!(
            "two_step: {} weights for {} estimates",
            weights.len(),
            estimates.len()
        )));
    }
    if weights.is_empty() {
        return Err(Error::InvalidArgument(
            "two_step: need at least one unit".into(),
        ));
    }
    Ok(accum::dot(weights, estimates) / weights.len() as f64)
}

/// Second-step no-intercept regression of average returns on slopes:
/// `sum_i avg_i slope_i / sum_i slope_i^2`.
pub fn fama_macbeth(avg_returns: &[f64], slopes: &[f64]) -> Result<f64> {
    if avg_returns.len() != slopes.len() {
        return Err(Error::DimensionMismatch(format!(
            "two_step: {} average returns for {} slopes",
            avg_returns.len(),
            slopes.len()
        )));
    }
    let denom = accum::dot(slopes, slopes);
    if denom == 0.0 {
        return Err(Error::DegenerateRegressor(
            "two_step: slopes are identically zero in the second step".into(),
        ));
    }
    Ok(accum::dot(avg_returns, slopes) / denom)
}

/// Split-sample instrumental-variables ratio
/// `sum_i inst_i slope_i / sum_i inst_i avg_i`,
/// with the two slope sets estimated on disjoint sub-samples.
pub fn split_sample_iv(
    avg_returns: &[f64],
    slopes: &[f64],
    instrument_slopes: &[f64],
) -> Result<f64> {
    if avg_returns.len() != slopes.len() || slopes.len() != instrument_slopes.len() {
        return Err(Error::DimensionMismatch(format!(
            "two_step: lengths {} / {} / {} differ",
            avg_returns.len(),
            slopes.len(),
            instrument_slopes.len()
        )));
    }
    let denom = accum::dot(instrument_slopes, avg_returns);
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::WeakInstrument(
            "two_step: instrument-return cross moment is zero".into(),
        ));
    }
    Ok(accum::dot(instrument_slopes, slopes) / denom)
}

/// First-step estimate collections.
#[derive(Clone, Debug)]
pub struct FirstPassEstimates {
    /// Per-unit average returns.
    pub avg_returns: Vec<f64>,
    /// Per-unit slopes, full sample or sub-sample.
    pub slopes: Vec<f64>,
    /// Slopes from a second, disjoint sub-sample; present only for
    /// split-sample estimation.
    pub instrument_slopes: Option<Vec<f64>>,
}

impl FirstPassEstimates {
    pub fn new(
        avg_returns: Vec<f64>,
        slopes: Vec<f64>,
        instrument_slopes: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = avg_returns.len();
        if slopes.len() != n || instrument_slopes.as_ref().is_some_and(|s| s.len() != n) {
            return Err(Error::DimensionMismatch(
                "two_step: first-pass estimate lengths differ".into(),
            ));
        }
        Ok(Self {
            avg_returns,
            slopes,
            instrument_slopes,
        })
    }
}

/// Decomposition of the centered second-step cross moment into the parts
/// that are linear and quadratic in the first-step estimation errors.
#[derive(Clone, Copy, Debug)]
pub struct NoiseDecomposition {
    /// `(1/sqrt(N)) sum_i (avg_i slope_i - true_avg_i true_slope_i)`.
    pub total: f64,
    /// Part linear in the estimation errors.
    pub linear_part: f64,
    /// Part quadratic in the estimation errors.
    pub quadratic_part: f64,
}

/// Splits the centered cross moment of the two first-step estimates around
/// the known truth. A simulation-only diagnostic: it needs the true betas.
///
/// Writing `avg_i = a_i + u_i` and `slope_i = b_i + w_i` with
/// `a_i = lambda * beta_i` and `b_i = beta_i`,
///
/// ```text
/// avg_i slope_i - a_i b_i = (a_i w_i + b_i u_i) + u_i w_i
/// ```
///
/// so the linear and quadratic parts recompose the total exactly. The
/// common expectation of the error product is not identifiable from a single
/// panel and cancels from both sides, so it is omitted from the centering.
pub fn noise_decomposition(
    panel: &AssetPanel,
    estimates: &FirstPassEstimates,
) -> Result<NoiseDecomposition> {
    let truth = panel.truth.as_ref().ok_or_else(|| {
        Error::TruthUnavailable("two_step: noise decomposition needs simulation truth".into())
    })?;
    let n = panel.n_units();
    if estimates.avg_returns.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "two_step: {} estimates for {n} units",
            estimates.avg_returns.len()
        )));
    }
    let sqrt_n = (n as f64).sqrt();
    let mut total = Accumulator::new();
    let mut linear = Accumulator::new();
    let mut quadratic = Accumulator::new();
    for i in 0..n {
        let a = truth.lambda * truth.beta[i];
        let b = truth.beta[i];
        let u = estimates.avg_returns[i] - a;
        let w = estimates.slopes[i] - b;
        total.add(estimates.avg_returns[i] * estimates.slopes[i] - a * b);
        linear.add(a * w + b * u);
        quadratic.add(u * w);
    }
    Ok(NoiseDecomposition {
        total: total.total() / sqrt_n,
        linear_part: linear.total() / sqrt_n,
        quadratic_part: quadratic.total() / sqrt_n,
    })
}

/// Configuration of the demonstration asset-pricing design
/// `r_it = beta_i (lambda + F_t) + e_it`, with betas standard normal shifted
/// by one, the factor standard normal, and errors from the panel design in
/// [`crate::dgp`].
#[derive(Clone, Debug)]
pub struct TwoStepConfig {
    pub base: SimConfig,
    pub lambda: f64,
}

/// Simulates one asset panel of the demonstration design.
pub fn simulate_asset_panel(config: &TwoStepConfig, rep_index: u64) -> Result<AssetPanel> {
    let error_panel = dgp::simulate_panel(&config.base, rep_index)?;
    let n = config.base.n_units;
    let t_len = config.base.n_periods;
    let mut stream = rng::substream(config.base.master_seed, rep_index, rng::STREAM_ASSET);
    let beta: Vec<f64> = (0..n)
        .map(|_| 1.0 + stream.sample::<f64, _>(StandardNormal))
        .collect();
    let factor = rng::standard_normals(&mut stream, t_len);

    let mut returns = Matrix::zeros(n, t_len);
    for i in 0..n {
        let err_row = error_panel.errors.row(i);
        let ret_row = returns.row_mut(i);
        for t in 0..t_len {
            ret_row[t] = beta[i] * (config.lambda + factor[t]) + err_row[t];
        }
    }
    AssetPanel::new(
        returns,
        factor,
        Some(PanelTruth {
            lambda: config.lambda,
            beta,
        }),
    )
}

/// Point estimates of the three second-step estimators on one panel.
///
/// The weighted average uses unit weights on the average returns; the
/// two-pass estimator regresses average returns on full-sample slopes; the
/// split-sample estimator uses first-half slopes instrumented by second-half
/// slopes.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LambdaEstimates {
    pub weighted_average: f64,
    pub fama_macbeth: f64,
    pub split_sample_iv: f64,
}

/// Computes all three second-step estimates.
pub fn lambda_estimates(panel: &AssetPanel) -> Result<LambdaEstimates> {
    let t_len = panel.n_periods();
    let avg = mean_returns(panel);
    let full = first_pass(panel, None)?;
    let h1 = first_pass(panel, Some(&first_half_mask(t_len)))?;
    let h2 = first_pass(panel, Some(&second_half_mask(t_len)))?;
    Ok(LambdaEstimates {
        weighted_average: weighted_average_estimator(&vec![1.0; panel.n_units()], &avg)?,
        fama_macbeth: fama_macbeth(&avg, &full)?,
        split_sample_iv: split_sample_iv(&avg, &h1, &h2)?,
    })
}

/// A two-sided confidence interval.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

/// Bootstrap intervals for the three estimators.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LambdaIntervals {
    pub weighted_average: Interval,
    pub fama_macbeth: Interval,
    pub split_sample_iv: Interval,
}

/// Wild-bootstrap confidence intervals for the second-step estimates.
///
/// A simulation-only diagnostic: each replicate reweights the true errors by
/// period signs, rebuilds the returns around the known truth, and recomputes
/// the estimators. The interval is the basic bootstrap
/// `[est - q_{1-a/2}(est* - lambda), est - q_{a/2}(est* - lambda)]`
/// with quantiles interpolated between order statistics.
pub fn bootstrap_lambda_intervals(
    panel: &AssetPanel,
    n_replicates: usize,
    seed: u64,
    level: f64,
) -> Result<LambdaIntervals> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "two_step: interval level must lie in (0, 1), got {level}"
        )));
    }
    let required = (2.0 / level).ceil() as usize - 1;
    if n_replicates < required {
        return Err(Error::InvalidArgument(format!(
            "two_step: {n_replicates} bootstrap replicates cannot resolve the {level} interval; \
             need at least {required}"
        )));
    }
    let truth = panel.truth.as_ref().ok_or_else(|| {
        Error::TruthUnavailable("two_step: bootstrap intervals need simulation truth".into())
    })?;
    let n = panel.n_units();
    let t_len = panel.n_periods();
    let estimates = lambda_estimates(panel)?;

    // Recover the errors once; replicates only flip their signs per period.
    let mut errors = Matrix::zeros(n, t_len);
    for i in 0..n {
        let ret_row = panel.returns.row(i);
        let err_row = errors.row_mut(i);
        for t in 0..t_len {
            err_row[t] = ret_row[t] - truth.beta[i] * (truth.lambda + panel.factor[t]);
        }
    }

    let mut shifts_wa = Vec::with_capacity(n_replicates);
    let mut shifts_fm = Vec::with_capacity(n_replicates);
    let mut shifts_iv = Vec::with_capacity(n_replicates);
    let mut reweighted = Matrix::zeros(n, t_len);
    for b in 0..n_replicates {
        let mut stream = rng::substream(seed, b as u64, rng::STREAM_BOOTSTRAP);
        let signs = rademacher_weights(t_len, &mut stream).signs;
        for i in 0..n {
            let err_row = errors.row(i);
            let out_row = reweighted.row_mut(i);
            for t in 0..t_len {
                out_row[t] =
                    truth.beta[i] * (truth.lambda + panel.factor[t]) + signs[t] * err_row[t];
            }
        }
        let replicate = AssetPanel {
            returns: reweighted.clone(),
            factor: panel.factor.clone(),
            truth: panel.truth.clone(),
        };
        let est = lambda_estimates(&replicate)?;
        shifts_wa.push(est.weighted_average - truth.lambda);
        shifts_fm.push(est.fama_macbeth - truth.lambda);
        shifts_iv.push(est.split_sample_iv - truth.lambda);
    }

    let interval = |estimate: f64, shifts: &mut Vec<f64>| {
        shifts.sort_unstable_by(f64::total_cmp);
        Interval {
            lower: estimate - quantile_sorted(shifts, 1.0 - level / 2.0),
            upper: estimate - quantile_sorted(shifts, level / 2.0),
        }
    };
    Ok(LambdaIntervals {
        weighted_average: interval(estimates.weighted_average, &mut shifts_wa),
        fama_macbeth: interval(estimates.fama_macbeth, &mut shifts_fm),
        split_sample_iv: interval(estimates.split_sample_iv, &mut shifts_iv),
    })
}
