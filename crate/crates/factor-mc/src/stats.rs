//! Per-unit panel statistics, their cross-sectional aggregate, and the
//! plug-in variance estimator.
//!
//! For each unit the linear component averages common-variable weighted
//! errors over time, and the quadratic component sums weighted cross-period
//! error products strictly below the diagonal:
//!
//! ```text
//! linear_i    = (1/sqrt(T)) sum_s  v_s * gamma_i * e_is
//! quadratic_i = (1/T) sum_s sum_{t<s} w_st * e_it * e_is
//! ```
//!
//! The aggregate scales the unit sums by `1/sqrt(N)`. A general direct
//! evaluation costs `O(N T^2)`; under product weights `w_st = v_s v_t` the
//! quadratic component factorizes and costs `O(N T)`.

use serde::Serialize;

use crate::accum::{self, Accumulator};
use crate::dgp::FactorPanel;
use crate::error::{Error, Result};

/// The two statistic components.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Component {
    Linear,
    Quadratic,
}

impl Component {
    pub const ALL: [Component; 2] = [Component::Linear, Component::Quadratic];

    pub fn as_str(self) -> &'static str {
        match self {
            Component::Linear => "linear",
            Component::Quadratic => "quadratic",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Component::Linear => 0,
            Component::Quadratic => 1,
        }
    }
}

impl std::fmt::Display for Component {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A (linear, quadratic) pair of reals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ComponentPair {
    pub linear: f64,
    pub quadratic: f64,
}

impl ComponentPair {
    pub fn get(&self, c: Component) -> f64 {
        match c {
            Component::Linear => self.linear,
            Component::Quadratic => self.quadratic,
        }
    }
}

/// Pair weights `w_st`, consumed for `t < s` only.
pub trait PairWeights {
    fn weight(&self, s: usize, t: usize) -> f64;
}

/// Product form `w_st = v_s * v_t`. This is the form that admits the
/// factorized fast path.
pub struct ProductWeights<'a> {
    common: &'a [f64],
}

impl<'a> ProductWeights<'a> {
    pub fn new(common: &'a [f64]) -> Self {
        Self { common }
    }

    pub fn from_panel(panel: &'a FactorPanel) -> Self {
        Self {
            common: &panel.common,
        }
    }
}

impl PairWeights for ProductWeights<'_> {
    #[inline]
    fn weight(&self, s: usize, t: usize) -> f64 {
        self.common[s] * self.common[t]
    }
}

/// Symmetrized cross product of two common variables,
/// `w_st = a_s * b_t + a_t * b_s`. Arises when the quadratic term couples two
/// different first-step regressors.
pub struct CrossProductWeights<'a> {
    pub first: &'a [f64],
    pub second: &'a [f64],
}

impl PairWeights for CrossProductWeights<'_> {
    #[inline]
    fn weight(&self, s: usize, t: usize) -> f64 {
        self.first[s] * self.second[t] + self.first[t] * self.second[s]
    }
}

impl<F: Fn(usize, usize) -> f64> PairWeights for F {
    #[inline]
    fn weight(&self, s: usize, t: usize) -> f64 {
        self(s, t)
    }
}

/// Per-unit statistics together with their aggregate.
#[derive(Clone, Debug)]
pub struct UnitStatistics {
    pub linear: Vec<f64>,
    pub quadratic: Vec<f64>,
    /// `(1/sqrt(N))` times the column sums of the two unit vectors.
    pub aggregate: ComponentPair,
}

impl UnitStatistics {
    /// Aggregates per-unit components. Errors on empty or mismatched input.
    pub fn from_components(linear: Vec<f64>, quadratic: Vec<f64>) -> Result<Self> {
        if linear.len() != quadratic.len() {
            return Err(Error::DimensionMismatch(format!(
                "stats: {} linear vs {} quadratic unit values",
                linear.len(),
                quadratic.len()
            )));
        }
        if linear.is_empty() {
            return Err(Error::InvalidArgument(
                "stats: need at least one unit".into(),
            ));
        }
        let sqrt_n = (linear.len() as f64).sqrt();
        let aggregate = ComponentPair {
            linear: accum::sum(&linear) / sqrt_n,
            quadratic: accum::sum(&quadratic) / sqrt_n,
        };
        Ok(Self {
            linear,
            quadratic,
            aggregate,
        })
    }

    pub fn n_units(&self) -> usize {
        self.linear.len()
    }
}

/// Linear component for every unit.
pub fn linear_component(panel: &FactorPanel) -> Vec<f64> {
    let n = panel.n_units();
    let t_len = panel.n_periods();
    let sqrt_t = (t_len as f64).sqrt();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let row = panel.errors.row(i);
        let mut acc = Accumulator::new();
        for t in 0..t_len {
            acc.add(panel.common[t] * row[t]);
        }
        out.push(panel.params.weights[i] * acc.total() / sqrt_t);
    }
    out
}

/// Quadratic component under arbitrary pair weights, `O(N T^2)`.
///
/// The sum runs strictly below the diagonal; `T = 1` yields the empty sum.
pub fn quadratic_component_direct<W: PairWeights>(panel: &FactorPanel, weights: &W) -> Vec<f64> {
    let n = panel.n_units();
    let t_len = panel.n_periods();
    let t_f = t_len as f64;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let row = panel.errors.row(i);
        let mut acc = Accumulator::new();
        for s in 1..t_len {
            for t in 0..s {
                acc.add(weights.weight(s, t) * row[t] * row[s]);
            }
        }
        out.push(acc.total() / t_f);
    }
    out
}

/// Quadratic component under the panel's product weights, `O(N T)`.
///
/// Uses the running prefix `P_is = sum_{t<=s} v_t e_it`: each term
/// `(v_s e_is) * P_{i,s-1}` adds exactly the weighted products below the
/// diagonal.
pub fn quadratic_component_factored(panel: &FactorPanel) -> Vec<f64> {
    let n = panel.n_units();
    let t_len = panel.n_periods();
    let t_f = t_len as f64;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let row = panel.errors.row(i);
        let mut prefix = 0.0;
        let mut acc = Accumulator::new();
        for s in 0..t_len {
            let x = panel.common[s] * row[s];
            acc.add(x * prefix);
            prefix += x;
        }
        out.push(acc.total() / t_f);
    }
    out
}

/// Periods above which the kernel's time sums switch to compensated
/// accumulation.
const COMPENSATED_PERIODS: usize = 10_000;

/// Reusable evaluation kernel for the product-weight statistics and their
/// sign-reweighted versions.
///
/// The kernel stores the period products `x_it = v_t * e_it` once. Both
/// components then follow from the per-unit sign sums
/// `S_i = sum_t d_t * x_it` (with `d` identically one for the original
/// statistic):
///
/// ```text
/// linear_i    = gamma_i * S_i / sqrt(T)
/// quadratic_i = (S_i^2 - Q_i) / (2 T),   Q_i = sum_t x_it^2
/// ```
///
/// because squaring the sum produces every ordered pair once and `d_t^2 = 1`
/// for sign weights. Each `S_i` accumulates in ascending `t` no matter how
/// replicates are blocked, so a given sign vector always produces
/// bit-identical output, `d = +1` reproduces the original statistic exactly,
/// and `d = -1` flips `S_i` (and hence the linear component) while leaving
/// the quadratic component untouched.
pub struct StatisticKernel {
    /// Period-major products, `x[t * n + i] = v_t * e_it`.
    x: Vec<f64>,
    /// Per-unit sums of squared products.
    sq: Vec<f64>,
    weights: Vec<f64>,
    n: usize,
    t_len: usize,
}

impl StatisticKernel {
    pub fn new(panel: &FactorPanel) -> Self {
        let n = panel.n_units();
        let t_len = panel.n_periods();
        let mut x = vec![0.0; n * t_len];
        let mut sq = vec![0.0; n];
        for i in 0..n {
            let row = panel.errors.row(i);
            let mut q = Accumulator::new();
            for t in 0..t_len {
                let v = panel.common[t] * row[t];
                x[t * n + i] = v;
                q.add(v * v);
            }
            sq[i] = q.total();
        }
        Self {
            x,
            sq,
            weights: panel.params.weights.clone(),
            n,
            t_len,
        }
    }

    pub fn n_units(&self) -> usize {
        self.n
    }

    pub fn n_periods(&self) -> usize {
        self.t_len
    }

    /// Per-unit sign sums for `rows` sign vectors at once:
    /// `out[r * n + i] = sum_t deltas[r * t_len + t] * x_it`.
    ///
    /// Rows are blocked four at a time so each period row of `x` is loaded
    /// once per block; the accumulation order over `t` is unchanged by the
    /// blocking.
    pub fn sign_sums(&self, deltas: &[f64], rows: usize, out: &mut [f64]) {
        assert_eq!(
            deltas.len(),
            rows * self.t_len,
            "sign rows must be rows x T"
        );
        assert_eq!(out.len(), rows * self.n, "output must be rows x N");
        out.fill(0.0);
        if self.t_len > COMPENSATED_PERIODS {
            self.sign_sums_compensated(deltas, rows, out);
            return;
        }
        let n = self.n;
        let mut r = 0;
        while r + 4 <= rows {
            let d0 = &deltas[r * self.t_len..(r + 1) * self.t_len];
            let d1 = &deltas[(r + 1) * self.t_len..(r + 2) * self.t_len];
            let d2 = &deltas[(r + 2) * self.t_len..(r + 3) * self.t_len];
            let d3 = &deltas[(r + 3) * self.t_len..(r + 4) * self.t_len];
            let (o0, rest) = out[r * n..].split_at_mut(n);
            let (o1, rest) = rest.split_at_mut(n);
            let (o2, rest) = rest.split_at_mut(n);
            let o3 = &mut rest[..n];
            for t in 0..self.t_len {
                let xr = &self.x[t * n..(t + 1) * n];
                let (w0, w1, w2, w3) = (d0[t], d1[t], d2[t], d3[t]);
                for i in 0..n {
                    let xv = xr[i];
                    o0[i] += w0 * xv;
                    o1[i] += w1 * xv;
                    o2[i] += w2 * xv;
                    o3[i] += w3 * xv;
                }
            }
            r += 4;
        }
        while r < rows {
            let d = &deltas[r * self.t_len..(r + 1) * self.t_len];
            let o = &mut out[r * n..(r + 1) * n];
            for t in 0..self.t_len {
                let xr = &self.x[t * n..(t + 1) * n];
                let w = d[t];
                for i in 0..n {
                    o[i] += w * xr[i];
                }
            }
            r += 1;
        }
    }

    fn sign_sums_compensated(&self, deltas: &[f64], rows: usize, out: &mut [f64]) {
        let n = self.n;
        let mut carry = vec![0.0; n];
        for r in 0..rows {
            let d = &deltas[r * self.t_len..(r + 1) * self.t_len];
            let o = &mut out[r * n..(r + 1) * n];
            carry.fill(0.0);
            for t in 0..self.t_len {
                let xr = &self.x[t * n..(t + 1) * n];
                let w = d[t];
                for i in 0..n {
                    let term = w * xr[i];
                    let s = o[i] + term;
                    carry[i] += if o[i].abs() >= term.abs() {
                        (o[i] - s) + term
                    } else {
                        (term - s) + o[i]
                    };
                    o[i] = s;
                }
            }
            for i in 0..n {
                o[i] += carry[i];
            }
        }
    }

    /// Turns one row of sign sums into per-unit components.
    pub fn components_from_sums(&self, sums: &[f64], linear: &mut [f64], quadratic: &mut [f64]) {
        assert_eq!(sums.len(), self.n);
        let sqrt_t = (self.t_len as f64).sqrt();
        let two_t = 2.0 * self.t_len as f64;
        for i in 0..self.n {
            let s = sums[i];
            linear[i] = self.weights[i] * s / sqrt_t;
            quadratic[i] = (s * s - self.sq[i]) / two_t;
        }
    }

    /// Full statistics under an optional sign reweighting of the periods.
    pub fn unit_statistics(&self, signs: Option<&[f64]>) -> Result<UnitStatistics> {
        let ones;
        let d = match signs {
            Some(d) => {
                if d.len() != self.t_len {
                    return Err(Error::DimensionMismatch(format!(
                        "stats: {} sign weights for {} periods",
                        d.len(),
                        self.t_len
                    )));
                }
                d
            }
            None => {
                ones = vec![1.0; self.t_len];
                &ones
            }
        };
        let mut sums = vec![0.0; self.n];
        self.sign_sums(d, 1, &mut sums);
        let mut linear = vec![0.0; self.n];
        let mut quadratic = vec![0.0; self.n];
        self.components_from_sums(&sums, &mut linear, &mut quadratic);
        UnitStatistics::from_components(linear, quadratic)
    }
}

/// Statistics of a panel under its own product weights.
pub fn compute_statistics(panel: &FactorPanel) -> UnitStatistics {
    StatisticKernel::new(panel)
        .unit_statistics(None)
        .expect("a panel always has at least one unit")
}

/// Plug-in variance estimate `(1/N) sum_i xi_i xi_i'` with component-wise
/// t-statistics.
#[derive(Clone, Copy, Debug)]
pub struct VarianceEstimate {
    /// 2x2 Gram average of the per-unit component vectors.
    pub sigma_hat: [[f64; 2]; 2],
    /// Component-wise studentized aggregates; `None` where the corresponding
    /// diagonal entry is exactly zero.
    pub t_stats: [Option<f64>; 2],
}

impl VarianceEstimate {
    /// Studentized aggregate for one component.
    pub fn t_stat(&self, c: Component) -> Result<f64> {
        self.t_stats[c.index()].ok_or_else(|| {
            Error::DegenerateVariance(format!(
                "stats: zero plug-in variance for the {c} component, no t-statistic"
            ))
        })
    }
}

/// Computes the Gram-average variance estimate and t-statistics.
pub fn variance_estimate(stats: &UnitStatistics) -> VarianceEstimate {
    let n = stats.n_units() as f64;
    let mut s11 = Accumulator::new();
    let mut s12 = Accumulator::new();
    let mut s22 = Accumulator::new();
    for (&a, &b) in stats.linear.iter().zip(&stats.quadratic) {
        s11.add(a * a);
        s12.add(a * b);
        s22.add(b * b);
    }
    let sigma_hat = [
        [s11.total() / n, s12.total() / n],
        [s12.total() / n, s22.total() / n],
    ];
    let t_of = |agg: f64, var: f64| {
        if var == 0.0 {
            None
        } else {
            Some(agg / var.sqrt())
        }
    };
    VarianceEstimate {
        sigma_hat,
        t_stats: [
            t_of(stats.aggregate.linear, sigma_hat[0][0]),
            t_of(stats.aggregate.quadratic, sigma_hat[1][1]),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{self, SimConfig};
    use crate::matrix::Matrix;
    use crate::rng;
    use rand::RngCore;

    fn panel_from(e: &[Vec<f64>], v: Vec<f64>, w: Vec<f64>) -> FactorPanel {
        FactorPanel::from_errors(Matrix::from_rows(e).unwrap(), v, w).unwrap()
    }

    fn random_panel(n: usize, t: usize, seed: u64) -> FactorPanel {
        let mut cfg = SimConfig::new(n, t);
        cfg.master_seed = seed;
        cfg.factor_strength = 1.0;
        dgp::simulate_panel(&cfg, 0).unwrap()
    }

    #[test]
    fn linear_single_term() {
        let p = panel_from(&[vec![5.0]], vec![2.0], vec![3.0]);
        assert_eq!(linear_component(&p), vec![30.0]);
    }

    #[test]
    fn zero_errors_give_zero_components() {
        let p = panel_from(&[vec![0.0; 4], vec![0.0; 4]], vec![1.0; 4], vec![1.0, 2.0]);
        assert_eq!(linear_component(&p), vec![0.0, 0.0]);
        assert_eq!(quadratic_component_factored(&p), vec![0.0, 0.0]);
        let stats = compute_statistics(&p);
        assert_eq!(
            stats.aggregate,
            ComponentPair {
                linear: 0.0,
                quadratic: 0.0
            }
        );
    }

    #[test]
    fn linear_matches_naive_loop() {
        let p = random_panel(1, 4, 31);
        let naive: f64 = (0..4)
            .map(|t| p.common[t] * p.params.weights[0] * p.errors.get(0, t))
            .sum::<f64>()
            / 2.0;
        let got = linear_component(&p)[0];
        assert!((got - naive).abs() <= 1e-12 * naive.abs().max(1.0));
    }

    #[test]
    fn quadratic_single_pair() {
        let p = panel_from(&[vec![2.0, 5.0]], vec![0.0, 0.0], vec![1.0]);
        let w = |_s: usize, _t: usize| 3.0;
        assert_eq!(quadratic_component_direct(&p, &w), vec![15.0]);
    }

    #[test]
    fn quadratic_empty_sum_at_one_period() {
        let p = panel_from(&[vec![7.0]], vec![2.0], vec![1.0]);
        assert_eq!(
            quadratic_component_direct(&p, &ProductWeights::from_panel(&p)),
            vec![0.0]
        );
        assert_eq!(quadratic_component_factored(&p), vec![0.0]);
        let stats = compute_statistics(&p);
        assert_eq!(stats.quadratic, vec![0.0]);
    }

    #[test]
    fn factored_single_pair_matches() {
        let root3 = 3.0f64.sqrt();
        let p = panel_from(&[vec![2.0, 5.0]], vec![root3, root3], vec![1.0]);
        let f = quadratic_component_factored(&p);
        assert!((f[0] - 15.0).abs() < 1e-12);
        let k = compute_statistics(&p);
        assert!((k.quadratic[0] - 15.0).abs() < 1e-12);
    }

    fn max_rel_deviation(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-12))
            .fold(0.0, f64::max)
    }

    #[test]
    fn factored_and_kernel_match_direct_path() {
        for seed in 0..100u64 {
            let p = random_panel(20, 30, 1000 + seed);
            let direct = quadratic_component_direct(&p, &ProductWeights::from_panel(&p));
            let factored = quadratic_component_factored(&p);
            let kernel = compute_statistics(&p).quadratic;
            assert!(max_rel_deviation(&direct, &factored) <= 1e-10);
            assert!(max_rel_deviation(&direct, &kernel) <= 1e-10);
        }
    }

    #[test]
    fn cross_product_weights_match_closure() {
        let p = random_panel(3, 6, 77);
        let a: Vec<f64> = (0..6).map(|t| 0.5 + t as f64).collect();
        let b: Vec<f64> = (0..6).map(|t| 1.0 - 0.3 * t as f64).collect();
        let w = CrossProductWeights {
            first: &a,
            second: &b,
        };
        let by_struct = quadratic_component_direct(&p, &w);
        let by_closure =
            quadratic_component_direct(&p, &|s: usize, t: usize| a[s] * b[t] + a[t] * b[s]);
        assert_eq!(by_struct, by_closure);
    }

    #[test]
    fn aggregate_trivial_cases() {
        let s = UnitStatistics::from_components(vec![4.0], vec![9.0]).unwrap();
        assert_eq!(
            s.aggregate,
            ComponentPair {
                linear: 4.0,
                quadratic: 9.0
            }
        );
        let s = UnitStatistics::from_components(vec![1.0; 4], vec![0.0; 4]).unwrap();
        assert_eq!(s.aggregate.linear, 2.0);
    }

    #[test]
    fn aggregate_matches_naive_summation() {
        let mut r = rng::substream(5, 0, rng::STREAM_PANEL);
        let lin = rng::standard_normals(&mut r, 37);
        let quad = rng::standard_normals(&mut r, 37);
        let s = UnitStatistics::from_components(lin.clone(), quad.clone()).unwrap();
        let naive = lin.iter().sum::<f64>() / 37.0f64.sqrt();
        assert!((s.aggregate.linear - naive).abs() < 1e-12);
        let naive_q = quad.iter().sum::<f64>() / 37.0f64.sqrt();
        assert!((s.aggregate.quadratic - naive_q).abs() < 1e-12);
    }

    #[test]
    fn aggregate_rejects_mismatch_and_empty() {
        assert!(UnitStatistics::from_components(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(UnitStatistics::from_components(vec![], vec![]).is_err());
    }

    #[test]
    fn variance_single_unit() {
        let s = UnitStatistics::from_components(vec![2.0], vec![3.0]).unwrap();
        let v = variance_estimate(&s);
        assert_eq!(v.sigma_hat, [[4.0, 6.0], [6.0, 9.0]]);
        assert_eq!(v.t_stat(Component::Linear).unwrap(), 1.0);
        assert_eq!(v.t_stat(Component::Quadratic).unwrap(), 1.0);
    }

    #[test]
    fn variance_degenerate_component() {
        let s = UnitStatistics::from_components(vec![1.0, -1.0], vec![0.0, 0.0]).unwrap();
        let v = variance_estimate(&s);
        assert_eq!(v.sigma_hat[0][0], 1.0);
        assert_eq!(v.sigma_hat[1][1], 0.0);
        assert!(v.t_stat(Component::Linear).is_ok());
        assert!(matches!(
            v.t_stat(Component::Quadratic),
            Err(Error::DegenerateVariance(_))
        ));
    }

    #[test]
    fn variance_is_psd_on_random_samples() {
        let p = random_panel(50, 40, 4242);
        let v = variance_estimate(&compute_statistics(&p));
        let tr = v.sigma_hat[0][0] + v.sigma_hat[1][1];
        let det = v.sigma_hat[0][0] * v.sigma_hat[1][1] - v.sigma_hat[0][1] * v.sigma_hat[1][0];
        let min_ev = (tr - (tr * tr - 4.0 * det).max(0.0).sqrt()) / 2.0;
        assert!(min_ev >= -1e-12, "min eigenvalue {min_ev}");
    }

    #[test]
    fn scaling_errors_scales_components() {
        let p = random_panel(6, 9, 9);
        let base = compute_statistics(&p);
        let c = 3.5;
        let scaled_rows: Vec<Vec<f64>> = (0..6)
            .map(|i| p.errors.row(i).iter().map(|e| c * e).collect())
            .collect();
        let sp = panel_from(&scaled_rows, p.common.clone(), p.params.weights.clone());
        let scaled = compute_statistics(&sp);
        for i in 0..6 {
            let lin_ratio = scaled.linear[i] / base.linear[i];
            let quad_ratio = scaled.quadratic[i] / base.quadratic[i];
            assert!((lin_ratio - c).abs() < 1e-12 * c);
            assert!((quad_ratio - c * c).abs() < 1e-10 * c * c);
        }
    }

    #[test]
    fn single_period_sign_flip_matches_direct_recomputation() {
        let p = random_panel(4, 8, 55);
        let flip_t = 3;
        let flipped_rows: Vec<Vec<f64>> = (0..4)
            .map(|i| {
                let mut row = p.errors.row(i).to_vec();
                row[flip_t] = -row[flip_t];
                row
            })
            .collect();
        let fp = panel_from(&flipped_rows, p.common.clone(), p.params.weights.clone());
        let direct = quadratic_component_direct(&fp, &ProductWeights::from_panel(&fp));
        let factored = quadratic_component_factored(&fp);
        assert!(max_rel_deviation(&direct, &factored) <= 1e-10);
        // The linear component loses exactly twice the flipped contribution.
        let lin_base = linear_component(&p);
        let lin_flip = linear_component(&fp);
        for i in 0..4 {
            let contribution =
                p.common[flip_t] * p.params.weights[i] * p.errors.get(i, flip_t) / 8.0f64.sqrt();
            assert!((lin_flip[i] - (lin_base[i] - 2.0 * contribution)).abs() < 1e-12);
        }
    }

    #[test]
    fn null_design_aggregates_have_zero_mean() {
        // Monte Carlo property: under zero common dependence both aggregate
        // components are mean zero, within four standard errors.
        let mut cfg = SimConfig::new(50, 50);
        cfg.master_seed = 321;
        cfg.factor_strength = 1.0;
        let reps = 400u64;
        let mut lin = Vec::with_capacity(reps as usize);
        let mut quad = Vec::with_capacity(reps as usize);
        for rep in 0..reps {
            let p = dgp::simulate_panel(&cfg, rep).unwrap();
            let s = compute_statistics(&p);
            lin.push(s.aggregate.linear);
            quad.push(s.aggregate.quadratic);
        }
        for values in [lin, quad] {
            let m = accum::mean(&values);
            let sd = accum::sample_variance(&values).sqrt();
            assert!(
                m.abs() <= 4.0 * sd / (reps as f64).sqrt(),
                "mean {m}, sd {sd}"
            );
        }
    }

    #[test]
    fn kernel_blocked_rows_match_single_rows() {
        // Blocking sign rows four at a time must not change any output bit.
        let p = random_panel(13, 21, 77);
        let k = StatisticKernel::new(&p);
        let rows = 7usize;
        let mut r = rng::substream(8, 0, rng::STREAM_BOOTSTRAP);
        let deltas: Vec<f64> = (0..rows * 21)
            .map(|_| if r.next_u64() & 1 == 1 { 1.0 } else { -1.0 })
            .collect();
        let mut blocked = vec![0.0; rows * 13];
        k.sign_sums(&deltas, rows, &mut blocked);
        for row in 0..rows {
            let mut single = vec![0.0; 13];
            k.sign_sums(&deltas[row * 21..(row + 1) * 21], 1, &mut single);
            let a: Vec<u64> = blocked[row * 13..(row + 1) * 13]
                .iter()
                .map(|v| v.to_bits())
                .collect();
            let b: Vec<u64> = single.iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b, "row {row}");
        }
    }

    #[test]
    fn compensated_time_sums_agree_with_plain() {
        // Above the period threshold the kernel compensates its time sums;
        // both variants must agree to near machine precision.
        let mut cfg = SimConfig::new(2, COMPENSATED_PERIODS + 1);
        cfg.master_seed = 1;
        let p = dgp::simulate_panel(&cfg, 0).unwrap();
        let k = StatisticKernel::new(&p);
        let stats = k.unit_statistics(None).unwrap();
        let factored = quadratic_component_factored(&p);
        let linear = linear_component(&p);
        for i in 0..2 {
            assert!((stats.quadratic[i] - factored[i]).abs() < 1e-9 * factored[i].abs().max(1.0));
            assert!((stats.linear[i] - linear[i]).abs() < 1e-10 * linear[i].abs().max(1.0));
        }
    }
}
