//! Iterative symmetric eigenvalue routines.
//!
//! The diagnostics only need the dominant part of the spectrum, so a power
//! iteration on the squared matrix is used: for symmetric `M` the dominant
//! eigenvalue of `M^2` is the squared spectral radius, and the iteration
//! converges in value even when `+r` and `-r` are both eigenvalues of `M`.

use crate::matrix::Matrix;
use crate::rng;

/// Convergence tolerance for the eigensolve.
pub const EIGEN_TOLERANCE: f64 = 1e-10;

/// Spectral radius (largest absolute eigenvalue) of a symmetric matrix.
///
/// Runs at most `10 * n` iterations of power iteration on `M^2` from a fixed
/// pseudorandom start vector, stopping once the Rayleigh quotient is stable
/// to `tol` in relative terms.
pub fn spectral_radius_symmetric(m: &Matrix, tol: f64) -> f64 {
    assert_eq!(m.rows(), m.cols(), "spectral radius needs a square matrix");
    let n = m.rows();
    if n == 0 {
        return 0.0;
    }
    let max_iter = 10 * n;

    // Deterministic start with components in every direction.
    let mut start_rng = rng::substream(0x0EED_BA5E, 0, rng::STREAM_PANEL);
    let mut x = rng::standard_normals(&mut start_rng, n);
    normalize(&mut x);

    let mut z = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut prev = f64::INFINITY;
    let mut radius_sq = 0.0;
    for _ in 0..max_iter.max(2) {
        m.mul_vec(&x, &mut z);
        // x is unit length, so |Mx|^2 is the Rayleigh quotient of M^2.
        radius_sq = z.iter().map(|v| v * v).sum::<f64>();
        if radius_sq == 0.0 {
            return 0.0;
        }
        if (radius_sq - prev).abs() <= tol * radius_sq.max(1.0) {
            break;
        }
        prev = radius_sq;
        m.mul_vec(&z, &mut y);
        x.copy_from_slice(&y);
        normalize(&mut x);
    }
    radius_sq.sqrt()
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix.
///
/// For PSD input the spectral radius is the maximal eigenvalue.
pub fn max_eigenvalue_psd(m: &Matrix, tol: f64) -> f64 {
    spectral_radius_symmetric(m, tol)
}

/// Operator norm of a symmetric matrix.
pub fn operator_norm_symmetric(m: &Matrix, tol: f64) -> f64 {
    spectral_radius_symmetric(m, tol)
}

fn normalize(x: &mut [f64]) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in x.iter_mut() {
            *v /= norm;
        }
    } else {
        // Degenerate start; fall back to the first basis vector.
        x[0] = 1.0;
        for v in &mut x[1..] {
            *v = 0.0;
        }
    }
}
