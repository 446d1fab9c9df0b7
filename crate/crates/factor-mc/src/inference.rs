//! Asymptotic-t and wild-bootstrap tests.
//!
//! The wild bootstrap draws independent signs `d_t` for every period,
//! reweights the errors by them without materializing the reweighted panel,
//! and recomputes the statistics. Two variants are exposed: one compares the
//! raw aggregate against the bootstrap aggregates, the other compares the
//! studentized aggregate against studentized bootstrap replicates.

use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dgp::FactorPanel;
use crate::error::{Error, Result};
use crate::rng;
use crate::stats::{variance_estimate, ComponentPair, StatisticKernel, UnitStatistics};

/// Period sign weights, each entry exactly +1 or -1.
#[derive(Clone, Debug)]
pub struct RademacherWeights {
    pub signs: Vec<f64>,
}

impl RademacherWeights {
    pub fn constant(len: usize, sign: f64) -> Self {
        assert!(sign == 1.0 || sign == -1.0);
        Self {
            signs: vec![sign; len],
        }
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }
}

/// Draws iid signs, +1 or -1 with probability one half each.
pub fn rademacher_weights(n_periods: usize, stream: &mut ChaCha8Rng) -> RademacherWeights {
    let signs = (0..n_periods)
        .map(|_| {
            if stream.next_u64() & 1 == 1 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    RademacherWeights { signs }
}

/// Recomputes the statistics with every error reweighted by its period sign.
///
/// The signs are absorbed into the period products, so the reweighted error
/// matrix is never built. The result equals a full recomputation on the
/// materialized reweighted panel.
pub fn bootstrap_replicate(
    panel: &FactorPanel,
    signs: &RademacherWeights,
) -> Result<UnitStatistics> {
    StatisticKernel::new(panel).unit_statistics(Some(&signs.signs))
}

/// Bootstrap replicate aggregates, and studentized replicates when requested.
#[derive(Clone, Debug)]
pub struct BootstrapDraws {
    /// Aggregate statistic of every replicate.
    pub aggregates: Vec<ComponentPair>,
    /// Studentized replicates; entries are NaN where a replicate's plug-in
    /// variance was degenerate. `None` when studentization was not requested.
    pub studentized: Option<Vec<ComponentPair>>,
    /// Number of replicates whose studentization was excluded as degenerate.
    pub n_excluded: usize,
}

impl BootstrapDraws {
    pub fn n_replicates(&self) -> usize {
        self.aggregates.len()
    }

    /// Aggregate values of one component across replicates.
    pub fn aggregate_values(&self, c: crate::stats::Component) -> Vec<f64> {
        self.aggregates.iter().map(|a| a.get(c)).collect()
    }

    /// Finite studentized values of one component across replicates.
    pub fn studentized_values(&self, c: crate::stats::Component) -> Result<Vec<f64>> {
        let t = self.studentized.as_ref().ok_or_else(|| {
            Error::InvalidArgument("inference: studentization was not requested".into())
        })?;
        Ok(t.iter()
            .map(|a| a.get(c))
            .filter(|v| v.is_finite())
            .collect())
    }
}

/// Share of replicates allowed to have a degenerate variance before the run
/// is considered broken.
const MAX_EXCLUDED_SHARE: f64 = 0.01;

/// Runs `n_replicates` wild-bootstrap replicates.
///
/// Replicate `b` consumes the substream `(seed, b)` of the bootstrap domain,
/// so draws are independent of evaluation order. With `studentize`, each
/// replicate also recomputes the plug-in variance from its per-unit values;
/// degenerate replicates are recorded as excluded, and more than 1% of them
/// is an error.
pub fn run_bootstrap(
    panel: &FactorPanel,
    n_replicates: usize,
    seed: u64,
    studentize: bool,
) -> Result<BootstrapDraws> {
    if n_replicates == 0 {
        return Err(Error::InvalidArgument(
            "inference: need at least one bootstrap replicate".into(),
        ));
    }
    let t_len = panel.n_periods();
    let mut all_signs = Vec::with_capacity(n_replicates * t_len);
    for b in 0..n_replicates {
        let mut stream = rng::substream(seed, b as u64, rng::STREAM_BOOTSTRAP);
        all_signs.extend(rademacher_weights(t_len, &mut stream).signs);
    }
    run_bootstrap_rows(panel, &all_signs, n_replicates, studentize)
}

/// Runs the bootstrap with caller-supplied sign vectors. Used by tests that
/// need forced sign patterns.
pub fn run_bootstrap_with_weights(
    panel: &FactorPanel,
    weights: &[RademacherWeights],
    studentize: bool,
) -> Result<BootstrapDraws> {
    let t_len = panel.n_periods();
    let mut rows = Vec::with_capacity(weights.len() * t_len);
    for w in weights {
        if w.len() != t_len {
            return Err(Error::DimensionMismatch(format!(
                "inference: sign vector of length {} for {} periods",
                w.len(),
                t_len
            )));
        }
        rows.extend_from_slice(&w.signs);
    }
    run_bootstrap_rows(panel, &rows, weights.len(), studentize)
}

fn run_bootstrap_rows(
    panel: &FactorPanel,
    sign_rows: &[f64],
    n_replicates: usize,
    studentize: bool,
) -> Result<BootstrapDraws> {
    let kernel = StatisticKernel::new(panel);
    let n = kernel.n_units();

    let mut sums = vec![0.0; n_replicates * n];
    kernel.sign_sums(sign_rows, n_replicates, &mut sums);

    let mut aggregates = Vec::with_capacity(n_replicates);
    let mut studentized = studentize.then(|| Vec::with_capacity(n_replicates));
    let mut n_excluded = 0usize;
    let mut linear = vec![0.0; n];
    let mut quadratic = vec![0.0; n];
    for b in 0..n_replicates {
        kernel.components_from_sums(&sums[b * n..(b + 1) * n], &mut linear, &mut quadratic);
        let stats = UnitStatistics::from_components(linear.clone(), quadratic.clone())?;
        aggregates.push(stats.aggregate);
        if let Some(t_rows) = studentized.as_mut() {
            let v = variance_estimate(&stats);
            let pair = ComponentPair {
                linear: v.t_stats[0].unwrap_or(f64::NAN),
                quadratic: v.t_stats[1].unwrap_or(f64::NAN),
            };
            if v.t_stats[0].is_none() || v.t_stats[1].is_none() {
                n_excluded += 1;
            }
            t_rows.push(pair);
        }
    }

    if n_excluded as f64 > MAX_EXCLUDED_SHARE * n_replicates as f64 {
        return Err(Error::ExcessiveDegenerateReplicates(format!(
            "inference: {n_excluded} of {n_replicates} replicates had degenerate variance"
        )));
    }
    Ok(BootstrapDraws {
        aggregates,
        studentized,
        n_excluded,
    })
}

/// How a test decision was reached.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TestMethod {
    AsymptoticT,
    BootstrapXi,
    BootstrapT,
}

impl TestMethod {
    pub const ALL: [TestMethod; 3] = [
        TestMethod::AsymptoticT,
        TestMethod::BootstrapXi,
        TestMethod::BootstrapT,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TestMethod::AsymptoticT => "asy-t",
            TestMethod::BootstrapXi => "bootstrap-xi",
            TestMethod::BootstrapT => "bootstrap-t",
        }
    }
}

impl std::fmt::Display for TestMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of one two-sided test.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TestDecision {
    pub statistic: f64,
    pub critical_value: f64,
    pub level: f64,
    pub reject: bool,
    pub method: TestMethod,
}

/// Two-sided test of a studentized statistic against standard Gaussian
/// critical values.
pub fn test_asymptotic(t: f64, level: f64) -> Result<TestDecision> {
    check_level(level)?;
    let critical_value = normal_quantile(1.0 - level / 2.0);
    Ok(TestDecision {
        statistic: t,
        critical_value,
        level,
        reject: t.abs() > critical_value,
        method: TestMethod::AsymptoticT,
    })
}

/// Two-sided bootstrap test: compares `|observed|` with the
/// `ceil((1 - level) * (B + 1))`-th order statistic of the absolute bootstrap
/// values.
///
/// The order-statistic convention makes the conditional rejection rate at
/// most `level + 1/(B+1)` for a statistic drawn from the same distribution.
pub fn test_bootstrap(observed: f64, bootstrap_values: &[f64], level: f64) -> Result<TestDecision> {
    check_level(level)?;
    let b = bootstrap_values.len();
    let required = (1.0 / level).ceil() as usize - 1;
    if b < required {
        return Err(Error::InvalidArgument(format!(
            "inference: {b} bootstrap values cannot resolve the {level} level; the \
             ceil((1-level)(B+1)) order statistic needs B >= {required}"
        )));
    }
    if bootstrap_values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "inference: bootstrap values must be finite; filter excluded replicates first".into(),
        ));
    }
    let mut abs: Vec<f64> = bootstrap_values.iter().map(|v| v.abs()).collect();
    abs.sort_unstable_by(f64::total_cmp);
    let k = ((1.0 - level) * (b + 1) as f64).ceil() as usize;
    let critical_value = abs[k.min(b) - 1];
    Ok(TestDecision {
        statistic: observed,
        critical_value,
        level,
        reject: observed.abs() > critical_value,
        method: TestMethod::BootstrapXi,
    })
}

/// One-sided (right-tailed) asymptotic test: rejects when the statistic
/// exceeds the upper Gaussian quantile.
pub fn test_asymptotic_one_sided(t: f64, level: f64) -> Result<TestDecision> {
    check_level(level)?;
    let critical_value = normal_quantile(1.0 - level);
    Ok(TestDecision {
        statistic: t,
        critical_value,
        level,
        reject: t > critical_value,
        method: TestMethod::AsymptoticT,
    })
}

/// One-sided (right-tailed) bootstrap test on the signed bootstrap values.
pub fn test_bootstrap_one_sided(
    observed: f64,
    bootstrap_values: &[f64],
    level: f64,
) -> Result<TestDecision> {
    check_level(level)?;
    let b = bootstrap_values.len();
    let required = (1.0 / level).ceil() as usize - 1;
    if b < required {
        return Err(Error::InvalidArgument(format!(
            "inference: {b} bootstrap values cannot resolve the {level} level; the \
             ceil((1-level)(B+1)) order statistic needs B >= {required}"
        )));
    }
    if bootstrap_values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "inference: bootstrap values must be finite; filter excluded replicates first".into(),
        ));
    }
    let mut sorted = bootstrap_values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let k = ((1.0 - level) * (b + 1) as f64).ceil() as usize;
    let critical_value = sorted[k.min(b) - 1];
    Ok(TestDecision {
        statistic: observed,
        critical_value,
        level,
        reject: observed > critical_value,
        method: TestMethod::BootstrapXi,
    })
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "inference: test level must lie strictly inside (0, 1), got {level}"
        )));
    }
    Ok(())
}

/// Standard normal quantile by the rational approximation of Wichura's
/// algorithm AS 241 (PPND16). Absolute error is below 1e-15 on (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(
        p > 0.0 && p < 1.0,
        "quantile needs p strictly inside (0, 1)"
    );
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * rational(r, &CENTRAL_NUM, &CENTRAL_DEN);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        rational(r, &TAIL_NUM, &TAIL_DEN)
    } else {
        r -= 5.0;
        rational(r, &FAR_TAIL_NUM, &FAR_TAIL_DEN)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

fn rational(r: f64, num: &[f64; 8], den: &[f64; 8]) -> f64 {
    let mut n = num[7];
    let mut d = den[7];
    for i in (0..7).rev() {
        n = n * r + num[i];
        d = d * r + den[i];
    }
    n / d
}

const CENTRAL_NUM: [f64; 8] = [
    3.387_132_872_796_366_608e0,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const CENTRAL_DEN: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];
const TAIL_NUM: [f64; 8] = [
    1.423_437_110_749_683_577_34e0,
    4.630_337_846_156_545_295_9e0,
    5.769_497_221_460_691_405_5e0,
    3.647_848_324_763_204_605_04e0,
    1.270_458_252_452_368_382_58e0,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_4e-4,
];
const TAIL_DEN: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87e0,
    1.676_384_830_183_803_849_4e0,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];
const FAR_TAIL_NUM: [f64; 8] = [
    6.657_904_643_501_103_777_2e0,
    5.463_784_911_164_114_369_9e0,
    1.784_826_539_917_291_335_8e0,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const FAR_TAIL_DEN: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];
