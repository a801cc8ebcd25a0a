//! Small numerical toolbox: standard-normal helpers, empirical quantiles,
//! and Gauss–Hermite nodes for common-factor integration.
//!
//! The quantile estimator interpolates linearly between adjacent order
//! statistics at position h = (n-1)q (the "inclusive" convention), so
//! q = 0 hits the minimum, q = 1 the maximum, and a series 1..=100 gives
//! 99.01 at q = 0.99.

use crate::error::{Error, Result};
use statrs::distribution::{ContinuousCDF, Normal};

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    // Unwrap is fine: the standard normal parameters are always valid.
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

/// Standard normal quantile function.
///
/// Returns -inf / +inf at p = 0 / 1; panics outside [0, 1] (caller bug).
pub fn norm_inv_cdf(p: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "probability out of range: {p}");
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Empirical q-quantile with linear interpolation between order statistics.
///
/// Accepts q in (0, 1]; values need not be sorted. Errors on an empty slice
/// or a quantile level outside the range.
pub fn empirical_quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySeries {
            what: "quantile input",
        });
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::OutOfRange {
            what: "quantile level",
            range: "(0, 1]",
            value: q,
        });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN in quantile input"));
    let n = sorted.len();
    let h = (n as f64 - 1.0) * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Nodes and weights of the n-point Gauss–Hermite rule (physicists'
/// convention: integrates f(x)·exp(-x²) exactly for polynomials up to
/// degree 2n-1; the weights sum to sqrt(pi)).
///
/// To integrate against the standard normal density use
/// ∫ g(z) φ(z) dz ≈ (1/√π) Σ w_i · g(√2 · x_i).
///
/// Computed via Golub–Welsch: the nodes are the eigenvalues of the
/// symmetric tridiagonal Jacobi matrix (zero diagonal, off-diagonal
/// √(k/2)) and each weight is √π times the squared first component of the
/// corresponding eigenvector. The QL sweep below tracks just that first
/// component, stays stable at any practical node count, and the ±pairs are
/// symmetrised exactly afterwards.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "need at least two quadrature nodes");
    // Jacobi matrix of the (monic-normalised) Hermite recurrence.
    let mut diag = vec![0.0f64; n];
    let mut off: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
    off.push(0.0);
    // First row of the accumulated eigenvector rotations.
    let mut first = vec![0.0f64; n];
    first[0] = 1.0;

    // Implicit-shift QL for a symmetric tridiagonal matrix.
    for l in 0..n {
        let mut iter = 0;
        loop {
            // Look for a negligible off-diagonal element.
            let mut m = l;
            while m + 1 < n {
                let scale = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * scale {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter <= 50, "QL iteration failed to converge");

            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0f64;
            let mut underflowed = false;
            for i in (l..m).rev() {
                let mut f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    // Recover from a negligible rotation and restart.
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    underflowed = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;

                f = first[i + 1];
                first[i + 1] = s * first[i] + c * f;
                first[i] = c * first[i] - s * f;
            }
            if underflowed {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }

    // Sort ascending, carrying the eigenvector components along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diag[a].partial_cmp(&diag[b]).expect("NaN eigenvalue"));
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let mut nodes: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut weights: Vec<f64> = order
        .iter()
        .map(|&i| sqrt_pi * first[i] * first[i])
        .collect();

    // The rule is symmetric; make the pairing exact so downstream
    // symmetry invariants hold to machine precision.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -x;
        nodes[j] = x;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}
