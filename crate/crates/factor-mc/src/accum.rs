//! Compensated accumulation helpers.
//!
//! Cross-sectional and cross-replication reductions use Neumaier summation so
//! that results do not drift with the length of the reduction. Each
//! accumulator adds its terms in a fixed order, which keeps every reduction
//! bit-reproducible regardless of vectorization or thread count.

/// Neumaier (improved Kahan) accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct Accumulator {
    sum: f64,
    carry: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        self.carry += if self.sum.abs() >= x.abs() {
            (self.sum - t) + x
        } else {
            (x - t) + self.sum
        };
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Compensated sum of a slice, left to right.
pub fn sum(values: &[f64]) -> f64 {
    let mut acc = Accumulator::new();
    for &v in values {
        acc.add(v);
    }
    acc.total()
}

/// Compensated dot product of two equal-length slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = Accumulator::new();
    for (&x, &y) in a.iter().zip(b) {
        acc.add(x * y);
    }
    acc.total()
}

/// Compensated mean. Returns 0 for an empty slice.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    sum(values) / values.len() as f64
}

/// Two-pass sample variance with divisor `n - 1`.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    assert!(n >= 2, "sample variance needs at least two observations");
    let m = mean(values);
    let mut acc = Accumulator::new();
    for &v in values {
        let d = v - m;
        acc.add(d * d);
    }
    acc.total() / (n - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_beats_naive_on_adversarial_input() {
        // 1 + 2^-60 repeated: naive summation loses the small terms.
        let tiny = (2.0f64).powi(-60);
        let mut values = vec![1.0];
        values.extend(std::iter::repeat(tiny).take(1_000_000));
        let exact = 1.0 + 1_000_000.0 * tiny;
        assert_eq!(sum(&values), exact);
    }

    #[test]
    fn variance_of_constant_shift_is_invariant() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [1.0e9 + 1.0, 1.0e9 + 2.0, 1.0e9 + 3.0, 1.0e9 + 4.0];
        assert!((sample_variance(&a) - sample_variance(&b)).abs() < 1e-6);
        assert!((sample_variance(&a) - 5.0 / 3.0).abs() < 1e-15);
    }
}
