//! Oracles shared by the integration-test targets.
//!
//! Everything here recomputes model quantities by a route independent of
//! the library's own algorithms — direct quadrature of densities and plain
//! bitmask enumeration of default subsets — so agreement is evidence, not
//! tautology. Each test target compiles its own copy and uses a subset.
#![allow(dead_code)]

use ccprisk::CcpStructure;
use statrs::distribution::{ContinuousCDF, Normal};

/// Exp-sinh quadrature for ∫₀^∞ f(s) ds with f smooth and decaying.
///
/// Substitutes s = exp((π/2)·sinh t) and sums the transformed trapezoid
/// over t ∈ [−4, 4] at step h = 1/64; for integrands that die off at both
/// ends this converges double-exponentially, far below the tolerances used
/// in these tests.
pub fn integrate_semi_infinite(f: impl Fn(f64) -> f64) -> f64 {
    let h = 1.0 / 64.0;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let n = (4.0 / h) as i64;
    let mut sum = 0.0;
    for j in -n..=n {
        let t = j as f64 * h;
        let s = (half_pi * t.sinh()).exp();
        let ds_dt = s * half_pi * t.cosh();
        let term = f(s) * ds_dt;
        if term.is_finite() {
            sum += term;
        }
    }
    sum * h
}

/// Expected uncollateralised loss by quadrature of the payoff against the
/// power-law loss density: E[(ΔV − K)⁺] with K = w·(M + D) and
/// P[ΔV > x] = p̂·(w·M/x)^α. Substituting x = K·e^s turns the integrand
/// into expm1(s)·exp(−α·s), which stays in [0, 1].
pub fn tail_loss_by_quadrature(m: f64, d: f64, w: f64, p_hat: f64, alpha: f64) -> f64 {
    let m_star = w * m;
    let k = w * (m + d);
    let prefactor = p_hat * alpha * m_star.powf(alpha) * k.powf(1.0 - alpha);
    prefactor
        * integrate_semi_infinite(|s| {
            if alpha * s > 700.0 {
                0.0
            } else {
                s.exp_m1() * (-alpha * s).exp()
            }
        })
}

/// Brute-force multi-default correction ε for every non-reporting member.
///
/// For each point z on a Simpson grid, computes each member's conditional
/// default probability p_j(z) = Φ((Φ⁻¹(P_j) − √ρ·z)/√(1−ρ)), then loops
/// over all 2^n default subsets accumulating Π p · Π (1−p) times the loss
/// amplifier (S_D − D_k)/(D_tot − S_D); scenarios that exhaust the fund
/// contribute zero, matching the engine's convention. Dividing the
/// z-integrated numerator by the unconditional P_k gives ε_k.
///
/// The engine walks a recursive tree with partial products and integrates
/// with Gauss–Hermite; this shares nothing with it beyond Φ itself.
pub fn epsilon_brute(ccp: &CcpStructure, correlation: f64) -> Vec<f64> {
    let n = Normal::new(0.0, 1.0).unwrap();
    let others = ccp.others();
    let nn = others.len();
    assert!(nn <= 12, "brute force is exponential; keep it small");

    let d_total = ccp.total_default_fund();
    let marginals: Vec<f64> = others.iter().map(|m| ccp.period_default_prob(m)).collect();
    let thresholds: Vec<f64> = marginals
        .iter()
        .map(|&p| if p > 0.0 { n.inverse_cdf(p) } else { f64::NEG_INFINITY })
        .collect();
    let funds: Vec<f64> = others.iter().map(|m| m.default_fund).collect();

    let sqrt_rho = correlation.sqrt();
    let sqrt_comp = (1.0 - correlation).sqrt();

    // Composite Simpson over z ∈ [−8, 8]; the integrand carries a factor
    // φ(z) so the truncation error is ~1e−15 and the rule's h⁴ error is far
    // below the 1e−6 comparisons made here.
    let intervals = 2000usize;
    let lo = -8.0f64;
    let h = 16.0 / intervals as f64;

    let mut numerator = vec![0.0f64; nn];
    for i in 0..=intervals {
        let z = lo + i as f64 * h;
        let simpson_w = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let phi = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let p_cond: Vec<f64> = thresholds
            .iter()
            .map(|&t| {
                if t == f64::NEG_INFINITY {
                    0.0
                } else {
                    n.cdf((t - sqrt_rho * z) / sqrt_comp)
                }
            })
            .collect();

        for mask in 1u32..(1 << nn) {
            let mut prob = 1.0;
            let mut fund_down = 0.0;
            for (j, (&p, &d)) in p_cond.iter().zip(&funds).enumerate() {
                if mask & (1 << j) != 0 {
                    prob *= p;
                    fund_down += d;
                } else {
                    prob *= 1.0 - p;
                }
            }
            let remaining = d_total - fund_down;
            if remaining <= 0.0 {
                continue; // exhausted: contributes nothing to the numerator
            }
            for (j, &d) in funds.iter().enumerate() {
                if mask & (1 << j) != 0 {
                    numerator[j] += simpson_w * phi * prob * (fund_down - d) / remaining;
                }
            }
        }
    }

    numerator
        .iter()
        .zip(&marginals)
        .map(|(&num, &p)| if p > 0.0 { num * h / 3.0 / p } else { 0.0 })
        .collect()
}
