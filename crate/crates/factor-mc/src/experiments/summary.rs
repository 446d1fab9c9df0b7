//! Distribution summaries across Monte Carlo replications.

use serde::Serialize;

use crate::accum::{self, Accumulator};
use crate::error::{Error, Result};

/// Moments and right tail of a normalized sample.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DistributionSummary {
    /// Sample mean divided by the sample standard deviation.
    pub mean: f64,
    /// `m3 / m2^(3/2)` on central moments with divisor n.
    pub skewness: f64,
    /// Raw kurtosis `m4 / m2^2`, so a Gaussian sample gives 3.
    pub kurtosis: f64,
    /// Empirical 95th percentile of the sample divided by its standard
    /// deviation, interpolated linearly between order statistics.
    pub right_quantile_5pct: f64,
    pub n_samples: usize,
}

/// Summarizes a sample, normalizing by the sample standard deviation
/// (divisor `n - 1`).
pub fn summarize_moments(samples: &[f64]) -> Result<DistributionSummary> {
    let n = samples.len();
    if n < 4 {
        return Err(Error::InvalidArgument(format!(
            "summary: need at least 4 samples for kurtosis, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = accum::mean(samples);
    let mut m2 = Accumulator::new();
    let mut m3 = Accumulator::new();
    let mut m4 = Accumulator::new();
    for &x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2.add(d2);
        m3.add(d2 * d);
        m4.add(d2 * d2);
    }
    let m2 = m2.total() / nf;
    let m3 = m3.total() / nf;
    let m4 = m4.total() / nf;
    // Normalization uses the divisor n-1 standard deviation.
    let sd = (m2 * nf / (nf - 1.0)).sqrt();
    if !(sd > 0.0) {
        return Err(Error::DegenerateScale(
            "summary: constant sample has no scale to normalize by".into(),
        ));
    }
    let mut normalized: Vec<f64> = samples.iter().map(|x| x / sd).collect();
    normalized.sort_unstable_by(f64::total_cmp);
    Ok(DistributionSummary {
        mean: mean / sd,
        skewness: m3 / m2.powf(1.5),
        kurtosis: m4 / (m2 * m2),
        right_quantile_5pct: quantile_sorted(&normalized, 0.95),
        n_samples: n,
    })
}

/// Linear interpolation between order statistics of a sorted sample
/// (the common "type 7" convention: index `(n - 1) * p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    assert!((0.0..=1.0).contains(&p));
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = h - lo as f64;
        sorted[lo] + w * (sorted[hi] - sorted[lo])
    }
}
