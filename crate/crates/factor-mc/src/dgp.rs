//! Factor-panel simulation design and its theoretical moment targets.
//!
//! Errors follow a weak latent factor structure
//! `e_it = loading_i * f_t + noise_it` with loadings scaled by `1/sqrt(N)` so
//! the factor stays undetectable while still distorting naive variance
//! estimation. The common variable co-moves with the factor through a
//! dependence parameter, which drives the power experiments.
//!
//! Every replication is a pure function of `(master_seed, rep_index)`; see
//! [`crate::rng`] for the substream scheme.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::accum;
use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::Matrix;
use crate::rng;

/// Simulation design parameters.
#[derive(Clone, Debug, Serialize)]
pub struct SimConfig {
    /// Number of cross-sectional units N.
    pub n_units: usize,
    /// Number of time periods T.
    pub n_periods: usize,
    /// Strength of the error factor structure (0 switches it off up to the
    /// heterogeneity draws).
    pub factor_strength: f64,
    /// Dependence between the common variable and the latent factor, in
    /// [-1, 1]. Zero is the null design.
    pub common_dependence: f64,
    /// Master seed; all substreams derive from it.
    pub master_seed: u64,
    /// Number of latent factors. Only the scalar design is implemented.
    pub n_factors: usize,
    /// Freeze the unit heterogeneity draws across replications.
    pub freeze_units: bool,
}

impl SimConfig {
    pub fn new(n_units: usize, n_periods: usize) -> Self {
        Self {
            n_units,
            n_periods,
            factor_strength: 0.0,
            common_dependence: 0.0,
            master_seed: 0,
            n_factors: 1,
            freeze_units: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_units < 1 {
            return Err(Error::InvalidArgument(
                "dgp: n_units must be at least 1".into(),
            ));
        }
        if self.n_periods < 2 {
            return Err(Error::InvalidArgument(
                "dgp: n_periods must be at least 2 (the quadratic statistic sums over t < s)"
                    .into(),
            ));
        }
        if !(self.factor_strength >= 0.0) {
            return Err(Error::InvalidArgument(
                "dgp: factor_strength must be >= 0".into(),
            ));
        }
        if !(self.common_dependence.abs() <= 1.0) {
            return Err(Error::InvalidArgument(
                "dgp: common_dependence must lie in [-1, 1] so its complement weight is real"
                    .into(),
            ));
        }
        if self.n_factors != 1 {
            return Err(Error::Unsupported(
                "dgp: only the single-factor design is implemented".into(),
            ));
        }
        Ok(())
    }
}

/// Per-unit parameters of one replication.
#[derive(Clone, Debug)]
pub struct UnitParams {
    /// Heterogeneity draws tau_i.
    pub heterogeneity: Vec<f64>,
    /// Noise standard deviations `noise_scale * (1 + |tau_i|)`.
    pub noise_sd: Vec<f64>,
    /// Factor loadings `(factor_strength + tau_i) / sqrt(N)`.
    pub loadings: Vec<f64>,
    /// Aggregation weights gamma_i (all one in this design).
    pub weights: Vec<f64>,
    /// Tuned noise scale.
    pub noise_scale: f64,
}

impl UnitParams {
    /// Builds loadings, weights and tuned noise scales from heterogeneity
    /// draws.
    pub fn from_heterogeneity(heterogeneity: Vec<f64>, factor_strength: f64) -> Result<Self> {
        let noise_scale = tune_noise_scale(&heterogeneity)?;
        let n = heterogeneity.len();
        let sqrt_n = (n as f64).sqrt();
        let noise_sd: Vec<f64> = heterogeneity
            .iter()
            .map(|t| noise_scale * (1.0 + t.abs()))
            .collect();
        let loadings: Vec<f64> = heterogeneity
            .iter()
            .map(|t| (factor_strength + t) / sqrt_n)
            .collect();
        Ok(Self {
            heterogeneity,
            noise_sd,
            loadings,
            weights: vec![1.0; n],
            noise_scale,
        })
    }

    pub fn n_units(&self) -> usize {
        self.heterogeneity.len()
    }

    /// Covariance matrix of the errors implied by the design:
    /// `loading_i * loading_j + I{i=j} * noise_sd_i^2`.
    pub fn error_covariance(&self) -> Matrix {
        let n = self.n_units();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut v = self.loadings[i] * self.loadings[j];
                if i == j {
                    v += self.noise_sd[i] * self.noise_sd[i];
                }
                m.set(i, j, v);
            }
        }
        m
    }
}

/// One simulated panel, together with every latent piece needed to re-derive
/// it.
#[derive(Clone, Debug)]
pub struct FactorPanel {
    /// Errors e_it, one row per unit.
    pub errors: Matrix,
    /// Common variable v_t.
    pub common: Vec<f64>,
    /// Latent factor f_t.
    pub factor: Vec<f64>,
    /// Idiosyncratic noise eta_it, one row per unit.
    pub noise: Matrix,
    /// Shock eps_t behind the common variable, kept so the construction
    /// identity for `common` stays checkable.
    pub common_shock: Vec<f64>,
    pub params: UnitParams,
    pub config: SimConfig,
}

impl FactorPanel {
    pub fn n_units(&self) -> usize {
        self.errors.rows()
    }

    pub fn n_periods(&self) -> usize {
        self.errors.cols()
    }

    /// Wraps explicit errors into a panel, for tests and custom designs.
    ///
    /// The latent pieces are filled so the construction identities hold
    /// trivially: zero loadings, noise equal to the errors.
    pub fn from_errors(errors: Matrix, common: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let n = errors.rows();
        let t = errors.cols();
        if common.len() != t {
            return Err(Error::DimensionMismatch(format!(
                "dgp: common variable has {} periods, errors have {t}",
                common.len()
            )));
        }
        if weights.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "dgp: {} weights for {n} units",
                weights.len()
            )));
        }
        let params = UnitParams {
            heterogeneity: vec![0.0; n],
            noise_sd: vec![1.0; n],
            loadings: vec![0.0; n],
            weights,
            noise_scale: 1.0,
        };
        let mut config = SimConfig::new(n, t);
        config.common_dependence = 0.0;
        Ok(Self {
            noise: errors.clone(),
            common_shock: common.clone(),
            errors,
            common,
            factor: vec![0.0; t],
            params,
            config,
        })
    }
}

/// Noise scale that makes the average cross-sectional noise variance exactly
/// one: `sqrt(N / sum_i (1 + |tau_i|)^2)`.
pub fn tune_noise_scale(heterogeneity: &[f64]) -> Result<f64> {
    if heterogeneity.is_empty() {
        return Err(Error::InvalidArgument(
            "dgp: cannot tune an empty unit set".into(),
        ));
    }
    let mut acc = accum::Accumulator::new();
    for t in heterogeneity {
        let b = 1.0 + t.abs();
        acc.add(b * b);
    }
    Ok((heterogeneity.len() as f64 / acc.total()).sqrt())
}

/// Simulates one panel. A pure function of `(config.master_seed, rep_index)`.
pub fn simulate_panel(config: &SimConfig, rep_index: u64) -> Result<FactorPanel> {
    config.validate()?;
    let n = config.n_units;
    let t = config.n_periods;

    let mut rng = rng::substream(config.master_seed, rep_index, rng::STREAM_PANEL);
    // Draw order is fixed: heterogeneity, factor, common shock, noise rows.
    let heterogeneity = if config.freeze_units {
        let mut frozen = rng::substream(config.master_seed, 0, rng::STREAM_FROZEN_UNITS);
        rng::standard_normals(&mut frozen, n)
    } else {
        rng::standard_normals(&mut rng, n)
    };
    let params = UnitParams::from_heterogeneity(heterogeneity, config.factor_strength)?;

    let factor = rng::standard_normals(&mut rng, t);
    let common_shock = rng::standard_normals(&mut rng, t);

    let mut noise = Matrix::zeros(n, t);
    for i in 0..n {
        let sd = params.noise_sd[i];
        for x in noise.row_mut(i) {
            let z: f64 = rng.sample(StandardNormal);
            *x = sd * z;
        }
    }

    let mut errors = Matrix::zeros(n, t);
    for i in 0..n {
        let loading = params.loadings[i];
        let noise_row = noise.row(i);
        let err_row = errors.row_mut(i);
        for s in 0..t {
            err_row[s] = loading * factor[s] + noise_row[s];
        }
    }

    let dep = config.common_dependence;
    let shock_weight = (1.0 - dep * dep).sqrt();
    let common: Vec<f64> = (0..t)
        .map(|s| dep * factor[s] + shock_weight * common_shock[s])
        .collect();

    Ok(FactorPanel {
        errors,
        common,
        factor,
        noise,
        common_shock,
        params,
        config: config.clone(),
    })
}

/// Which covariance regime a set of targets was assembled under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// Errors fully independent of the common variables.
    Independence,
    /// Conditional heteroskedasticity through a weak latent factor.
    ConditionalHeteroskedasticity,
}

/// Finite-sample moment targets for the aggregate statistic.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TheoreticalMoments {
    /// `(1/sqrt(N)) sum_i loading_i * weight_i`.
    pub loading_weight_moment: f64,
    /// `(1/N) sum_i noise_sd_i^2 * weight_i^2`.
    pub noise_weight_moment: f64,
    /// `(1/N) sum_i noise_sd_i^4`.
    pub noise_fourth_moment: f64,
    /// Second moment of the common variable (1 in this design).
    pub common_second_moment: f64,
    /// `(1/T^2) sum_s sum_{t<s} E w_st^2 = (1 - 1/T) / 2` under product
    /// weights with unit-variance common variable.
    pub pair_weight_second_moment: f64,
    /// `E[f_t^2 v_t^2] = 1 + 2 * common_dependence^2` in this design.
    pub factor_common_moment: f64,
    /// Target variance of the linear aggregate component.
    pub linear_variance: f64,
    /// Target variance of the quadratic aggregate component.
    pub quadratic_variance: f64,
    pub regime: Regime,
}

/// Assembles the finite-N covariance targets for the heteroskedastic regime.
pub fn theoretical_moments(params: &UnitParams, config: &SimConfig) -> TheoreticalMoments {
    let n = params.n_units() as f64;
    let t = config.n_periods as f64;

    let mut lw = accum::Accumulator::new();
    let mut nw = accum::Accumulator::new();
    let mut n4 = accum::Accumulator::new();
    for i in 0..params.n_units() {
        lw.add(params.loadings[i] * params.weights[i]);
        let w2 = params.weights[i] * params.weights[i];
        let sd2 = params.noise_sd[i] * params.noise_sd[i];
        nw.add(sd2 * w2);
        n4.add(sd2 * sd2);
    }
    let loading_weight_moment = lw.total() / n.sqrt();
    let noise_weight_moment = nw.total() / n;
    let noise_fourth_moment = n4.total() / n;

    let common_second_moment = 1.0;
    let pair_weight_second_moment = (1.0 - 1.0 / t) / 2.0;
    let dep = config.common_dependence;
    let factor_common_moment = 1.0 + 2.0 * dep * dep;

    let linear_variance = loading_weight_moment * loading_weight_moment * factor_common_moment
        + noise_weight_moment * common_second_moment;
    let quadratic_variance = noise_fourth_moment * pair_weight_second_moment;

    TheoreticalMoments {
        loading_weight_moment,
        noise_weight_moment,
        noise_fourth_moment,
        common_second_moment,
        pair_weight_second_moment,
        factor_common_moment,
        linear_variance,
        quadratic_variance,
        regime: Regime::ConditionalHeteroskedasticity,
    }
}

impl TheoreticalMoments {
    /// Covariance targets for the independence regime, assembled from the
    /// error-covariance diagnostics: the weighted covariance moment plays the
    /// role of the noise moment and the normalized squared trace plays the
    /// role of the fourth moment.
    pub fn independence(
        weighted_covariance_moment: f64,
        trace_moment: f64,
        common_second_moment: f64,
        pair_weight_second_moment: f64,
    ) -> Self {
        Self {
            loading_weight_moment: 0.0,
            noise_weight_moment: weighted_covariance_moment,
            noise_fourth_moment: trace_moment,
            common_second_moment,
            pair_weight_second_moment,
            factor_common_moment: 0.0,
            linear_variance: weighted_covariance_moment * common_second_moment,
            quadratic_variance: trace_moment * pair_weight_second_moment,
            regime: Regime::Independence,
        }
    }
}

/// Numerical diagnostics of an error covariance matrix against the
/// independence-regime conditions.
#[derive(Clone, Debug)]
pub struct IndependenceDiagnostics {
    pub covariance: Matrix,
    /// `gamma' E gamma / N`.
    pub weighted_covariance_moment: f64,
    /// `tr(E^2) / N`.
    pub trace_moment: f64,
    /// Largest eigenvalue of the covariance matrix.
    pub max_eigenvalue: f64,
    /// Operator norm of the covariance with its diagonal removed.
    pub offdiagonal_norm: f64,
    /// Whether the off-diagonal norm is below the caller's threshold, i.e.
    /// whether consistent plug-in variance estimation is plausible.
    pub near_diagonal: bool,
}

/// Computes the independence-regime diagnostics for a symmetric PSD
/// covariance matrix.
pub fn independence_diagnostics(
    covariance: &Matrix,
    weights: &[f64],
    near_diagonal_threshold: f64,
) -> Result<IndependenceDiagnostics> {
    let n = covariance.rows();
    if covariance.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "dgp: covariance must be square, got {n}x{}",
            covariance.cols()
        )));
    }
    if weights.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "dgp: {} weights for a {n}x{n} covariance",
            weights.len()
        )));
    }
    let asym = covariance.relative_asymmetry();
    if asym > 1e-12 {
        return Err(Error::AsymmetricMatrix(format!(
            "dgp: covariance asymmetry {asym:.3e} exceeds 1e-12"
        )));
    }

    let nf = n as f64;
    let mut quad = accum::Accumulator::new();
    let mut frob = accum::Accumulator::new();
    for i in 0..n {
        let row = covariance.row(i);
        for j in 0..n {
            quad.add(weights[i] * row[j] * weights[j]);
            frob.add(row[j] * row[j]);
        }
    }
    let weighted_covariance_moment = quad.total() / nf;
    let trace_moment = frob.total() / nf;

    let max_eigenvalue = linalg::max_eigenvalue_psd(covariance, linalg::EIGEN_TOLERANCE);

    let mut offdiag = covariance.clone();
    for i in 0..n {
        offdiag.set(i, i, 0.0);
    }
    let offdiagonal_norm = linalg::operator_norm_symmetric(&offdiag, linalg::EIGEN_TOLERANCE);

    Ok(IndependenceDiagnostics {
        covariance: covariance.clone(),
        weighted_covariance_moment,
        trace_moment,
        max_eigenvalue,
        offdiagonal_norm,
        near_diagonal: offdiagonal_norm < near_diagonal_threshold,
    })
}
