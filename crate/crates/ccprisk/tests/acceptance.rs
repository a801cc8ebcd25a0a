//! The acceptance gate.
//!
//! Every headline reference number this project commits to, checked at its
//! stated tolerance and reported as one `[PASS]`/`[FAIL]` line per check
//! (run with `--nocapture` to see the lines for green tests too). The
//! checks assert: a missed tolerance fails the build. Known gaps are left
//! failing on purpose rather than papered over with wider tolerances — see
//! the README for the analysis of which checks fail and why.

mod common;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ccprisk::{
    breach_probability, conditional_expected_tail_loss, contagion_factor, epsilon_exact,
    epsilon_mc, ewma_backward, ewma_forward, homogeneous_roster, pareto_fit, pareto_tail_prob,
    simplified_charge, stress_quantile, wrong_way_factor, CcpStructure, ClearingMember,
    MarketCalibration, ReturnKind, ReturnSeries, ScenarioEngineConfig, VolMapping,
};
use common::{epsilon_brute, tail_loss_by_quadrature};

/// Prints one line per check and fails the test at the end, so a single
/// miss never hides the other lines.
struct Gate {
    failures: usize,
}

impl Gate {
    fn new() -> Self {
        Gate { failures: 0 }
    }

    fn check(&mut self, ok: bool, line: String) {
        println!("[{}] {line}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failures += 1;
        }
    }

    fn finish(self) {
        assert!(
            self.failures == 0,
            "{} check(s) out of tolerance — see the [FAIL] lines above",
            self.failures
        );
    }
}

fn grid_points() -> Vec<(u32, f64, f64, f64)> {
    // (window days, spread bps, correlation, reference ε in %)
    let rhos = [0.0, 0.2, 0.4, 0.6, 0.7, 0.8, 0.9];
    let refs = [0.0, 1.0, 5.0, 19.0, 38.0, 81.0, 190.0];
    let mut points: Vec<(u32, f64, f64, f64)> = rhos
        .iter()
        .zip(refs)
        .map(|(&rho, reference)| (30, 200.0, rho, reference))
        .collect();
    points.push((10, 200.0, 0.6, 13.0));
    points.push((30, 100.0, 0.6, 15.0));
    points
}

fn grid_roster(window_days: u32, spread_bps: f64) -> CcpStructure {
    homogeneous_roster(
        15,
        100.0,
        1.0,
        spread_bps / 10_000.0,
        0.40,
        5u32.min(window_days),
        window_days,
    )
    .unwrap()
}

/// The multi-default correction for a 15-member homogeneous clearinghouse
/// (equal default funds, 200 bps spreads, 40% recovery) across correlations,
/// plus two variant columns, against the pinned reference values; and
/// the Monte Carlo backend against exact enumeration at every point.
#[test]
fn correction_grid_matches_the_reference_values() {
    let start = Instant::now();
    let mut gate = Gate::new();

    let mut exacts = Vec::new();
    for &(window, bps, rho, reference) in &grid_points() {
        let ccp = grid_roster(window, bps);
        let mut cfg = ScenarioEngineConfig::exact(&ccp, rho);
        cfg.quadrature_points = 256;
        let eps = epsilon_exact(&ccp, &cfg).unwrap().epsilon[0];
        exacts.push(eps);
        let got = 100.0 * eps;
        let (ok, tol) = if reference <= 5.0 {
            ((got - reference).abs() <= 1.0, "±1pp")
        } else if reference <= 40.0 {
            ((got - reference).abs() <= 2.0, "±2pp")
        } else {
            (((got - reference) / reference).abs() <= 0.10, "±10% rel")
        };
        gate.check(
            ok,
            format!(
                "eps({window}d, {bps:.0} bps, rho={:.0}%) = {got:.2}% vs reference {reference:.0}% ({tol})",
                100.0 * rho
            ),
        );
    }

    for (i, &(window, bps, rho, _)) in grid_points().iter().enumerate() {
        let ccp = grid_roster(window, bps);
        let cfg = ScenarioEngineConfig::monte_carlo(&ccp, rho, 2_000_000, 4000 + i as u64);
        let mc = epsilon_mc(&ccp, &cfg).unwrap();
        let diff = (mc.epsilon[0] - exacts[i]).abs();
        let bound = 3.0 * mc.std_error[0];
        gate.check(
            diff <= bound,
            format!(
                "monte carlo ({window}d, {bps:.0} bps, rho={:.0}%): |mc − exact| {diff:.2e} within 3se {bound:.2e}",
                100.0 * rho
            ),
        );
    }

    let elapsed = start.elapsed().as_secs_f64();
    gate.check(
        elapsed < 60.0,
        format!("grid runtime {elapsed:.1}s inside the 60s budget"),
    );
    gate.finish();
}

/// The membership charge at four pinned parameter sets, against the
/// pinned protection notionals and running costs.
#[test]
fn pinned_charge_reference_points() {
    let start = Instant::now();
    let mut gate = Gate::new();

    // 200 bps spread, 40% recovery.
    let lambda_bar = 0.02 / 0.6;
    let cases = [
        // (w, p̂, α, LGD_tot %, charge bps)
        (1.7, 0.14, 3.3, 10.3, 34.0),
        (2.2, 0.12, 3.3, 11.5, 38.0),
        (2.5, 0.16, 3.3, 17.4, 58.0),
        (1.3, 0.18, 4.4, 6.9, 23.0),
    ];
    for (w, p_hat, alpha, ref_lgd, ref_bps) in cases {
        let cal = MarketCalibration::new(w, 2.0, p_hat, alpha).unwrap();
        let sc = simplified_charge(100.0, 5.0, &cal, lambda_bar, 1.0).unwrap();
        let lgd = 100.0 * sc.lgd_total;
        let bps = 1e4 * sc.charge_fraction;
        gate.check(
            (lgd - ref_lgd).abs() <= 0.2,
            format!("LGD(w={w}, p̂={p_hat}, α={alpha}) = {lgd:.2}% vs {ref_lgd}% (±0.2pp)"),
        );
        gate.check(
            (bps - ref_bps).abs() <= 2.0,
            format!("charge(w={w}, p̂={p_hat}, α={alpha}) = {bps:.2} bps vs {ref_bps:.0} bps (±2bps)"),
        );
    }

    let elapsed = start.elapsed().as_secs_f64();
    gate.check(
        elapsed < 1.0,
        format!("charge runtime {elapsed:.3}s inside the 1s budget"),
    );
    gate.finish();
}

/// The conditional margin-breach probability at the pinned contagion
/// levels, each within ±1pp of its reference band.
#[test]
fn breach_probability_reference_row() {
    let mut gate = Gate::new();
    let cases = [
        // (γ, low %, high %) — band already includes the ±1pp tolerance
        (2.0, 11.0, 13.0),
        (2.1, 12.0, 15.0),
        (2.3, 15.0, 17.0),
        (2.6, 17.0, 20.0),
    ];
    for (gamma, lo, hi) in cases {
        let p = 100.0 * breach_probability(gamma, 0.01).unwrap();
        gate.check(
            (lo..=hi).contains(&p),
            format!("p̂(γ={gamma}) = {p:.2}% in [{lo:.0}%, {hi:.0}%]"),
        );
    }
    gate.finish();
}

/// The closed-form expected tail loss against direct quadrature of the
/// loss density over a randomized parameter grid.
#[test]
fn tail_loss_closed_form_equivalence() {
    let mut gate = Gate::new();
    let mut rng = ChaCha8Rng::seed_from_u64(314159);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let m = rng.random_range(5.0..500.0);
        let d = rng.random_range(0.0..100.0);
        let w = rng.random_range(1.0..3.0);
        let p_hat = rng.random_range(0.005..0.45);
        let alpha = rng.random_range(1.06..12.0);
        let member = ClearingMember::new("X", m, d, 0.02, 0.4).unwrap();
        let cal = MarketCalibration::new(w, 2.0, p_hat, alpha).unwrap();
        let got = conditional_expected_tail_loss(&member, &cal).unwrap();
        let want = tail_loss_by_quadrature(m, d, w, p_hat, alpha);
        worst = worst.max((got - want).abs() / want);
    }
    gate.check(
        worst < 1e-8,
        format!("closed form vs quadrature over 100 random books: worst rel err {worst:.2e} (< 1e-8)"),
    );
    gate.finish();
}

/// The exact correction-term engine against the brute-force subset oracle
/// on randomized rosters, and the Monte Carlo backend against exact.
#[test]
fn correction_term_oracle_equivalence() {
    let mut gate = Gate::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2718);

    for n_others in [3usize, 6, 10] {
        let mut members = vec![random_member(&mut rng, "CM00")];
        for i in 0..n_others {
            members.push(random_member(&mut rng, &format!("CM{:02}", i + 1)));
        }
        let ccp = CcpStructure::new(members, 0.0, 5, 30, 0.01).unwrap();

        let exact_at = |rho: f64| {
            let mut cfg = ScenarioEngineConfig::exact(&ccp, rho);
            cfg.quadrature_points = 256;
            epsilon_exact(&ccp, &cfg).unwrap()
        };

        for rho in [0.0, 0.3, 0.7] {
            let got = exact_at(rho);
            let want = epsilon_brute(&ccp, rho);
            let worst = got
                .epsilon
                .iter()
                .zip(&want)
                .map(|(g, w)| (g - w).abs() / w.abs().max(1e-300))
                .fold(0.0f64, f64::max);
            gate.check(
                worst < 1e-6,
                format!("exact vs brute force (n={n_others}, rho={rho}): worst rel err {worst:.2e} (< 1e-6)"),
            );
        }

        for rho in [0.3, 0.7] {
            let exact = exact_at(rho);
            // Rare multi-default hits make the numerator heavy-tailed, so
            // the standard-error estimate needs a generous sample count to
            // settle; 4·10⁶ keeps the 3σ comparison honest.
            let cfg =
                ScenarioEngineConfig::monte_carlo(&ccp, rho, 4_000_000, 1000 + n_others as u64);
            let mc = epsilon_mc(&ccp, &cfg).unwrap();
            let worst_ratio = mc
                .epsilon
                .iter()
                .zip(&exact.epsilon)
                .zip(&mc.std_error)
                .map(|((m, e), se)| (m - e).abs() / se)
                .fold(0.0f64, f64::max);
            gate.check(
                worst_ratio <= 3.0,
                format!(
                    "monte carlo vs exact (n={n_others}, rho={rho}): worst |diff|/se {worst_ratio:.2} (≤ 3)"
                ),
            );
        }
    }
    gate.finish();
}

fn random_member(rng: &mut ChaCha8Rng, id: &str) -> ClearingMember {
    let fund = rng.random_range(0.5..6.0);
    let spread = rng.random_range(0.004..0.04);
    ClearingMember::new(id, 100.0, fund, spread, 0.4).unwrap()
}

fn changes(values: Vec<f64>) -> ReturnSeries {
    ReturnSeries {
        horizon_days: 1,
        kind: ReturnKind::AbsoluteChange,
        values,
        overlapping: false,
    }
}

/// Tail-index recovery on synthetic data: exact power-law tails must come
/// back within ±0.25 on every seed, and a Gaussian sample should land in
/// the pinned equivalent-index band.
#[test]
fn tail_index_recovery_bands() {
    let mut gate = Gate::new();
    let n = 100_000;

    for alpha_true in [2.5f64, 3.3, 4.4] {
        let mut worst = 0.0f64;
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xs: Vec<f64> = (0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    (1.0 - u).powf(-1.0 / alpha_true)
                })
                .collect();
            let fit = pareto_fit(&changes(xs), 0.01).unwrap();
            worst = worst.max((fit.alpha - alpha_true).abs());
        }
        gate.check(
            worst <= 0.25,
            format!("recovered α for truth {alpha_true}: worst |err| over 10 seeds {worst:.3} (≤ 0.25)"),
        );
    }

    for seed in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let xs: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal).abs())
            .collect();
        let fit = pareto_fit(&changes(xs), 0.01).unwrap();
        gate.check(
            (6.0..=8.0).contains(&fit.alpha),
            format!("gaussian-tail equivalent index (seed {seed}) = {:.2} in [6, 8]", fit.alpha),
        );
    }
    gate.finish();
}

/// The estimator identities the calibration pipeline is built on.
#[test]
fn calibration_invariant_suite() {
    let mut gate = Gate::new();

    // Time-reversal duality: a forward pass equals a backward pass run on
    // the reversed series, read backwards.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let vals: Vec<f64> = (0..800)
        .map(|_| 0.01 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let n = vals.len();
    let series = ReturnSeries {
        horizon_days: 1,
        kind: ReturnKind::LogReturn,
        values: vals.clone(),
        overlapping: false,
    };
    let reversed = ReturnSeries {
        horizon_days: 1,
        kind: ReturnKind::LogReturn,
        values: vals.iter().rev().copied().collect(),
        overlapping: false,
    };
    let fwd = ewma_forward(&series, 0.94, 1e-4).unwrap();
    let back_rev = ewma_backward(&reversed, 0.94, 1e-4).unwrap();
    let worst = (0..n)
        .map(|i| {
            let a = fwd.vols[i];
            let b = back_rev.vols[n - 1 - i];
            (a - b).abs() / a
        })
        .fold(0.0f64, f64::max);
    gate.check(
        worst <= 1e-12,
        format!("EWMA time-reversal duality: worst rel gap {worst:.2e} (≤ 1e-12)"),
    );

    // Fixed point: constant returns seeded at their own variance stay put.
    let c = 0.007f64;
    let constant = changes(vec![c; 300]);
    let fixed = ewma_backward(&constant, 0.97, c * c).unwrap();
    let worst = fixed
        .vols
        .iter()
        .map(|v| (v - c).abs() / c)
        .fold(0.0f64, f64::max);
    gate.check(
        worst <= 1e-14,
        format!("EWMA fixed point on constant returns: worst rel gap {worst:.2e}"),
    );

    // Constant-vol series: the stress quantile equals today's vol, so the
    // wrong-way factor is exactly one under either margin mapping.
    let alternating: Vec<f64> = (0..600).map(|i| if i % 2 == 0 { 0.01 } else { -0.01 }).collect();
    let alt = ReturnSeries {
        horizon_days: 1,
        kind: ReturnKind::LogReturn,
        values: alternating,
        overlapping: false,
    };
    let back = ewma_backward(&alt, 0.99, 1e-4).unwrap();
    let current = *back.vols.last().unwrap();
    let stress = stress_quantile(&back, 0.99).unwrap();
    let w_lin = wrong_way_factor(&back, current, 0.99, VolMapping::Linear, 0.01).unwrap();
    let w_exp = wrong_way_factor(&back, current, 0.99, VolMapping::Exponential, 0.01).unwrap();
    gate.check(
        (stress - current).abs() <= 1e-15 && (w_lin - 1.0).abs() <= 1e-12,
        format!("w = {w_lin} on a constant-vol series (linear mapping)"),
    );
    gate.check(
        (w_exp - 1.0).abs() <= 1e-12,
        format!("w = {w_exp} on a constant-vol series (exponential mapping)"),
    );

    // Time-symmetric constant series: forward and backward vols coincide,
    // so the contagion factor is exactly one.
    let fwd_alt = ewma_forward(&alt, 0.99, 1e-4).unwrap();
    let gamma = contagion_factor(&back, &fwd_alt, 0.99).unwrap();
    gate.check(
        (gamma - 1.0).abs() <= 1e-12,
        format!("γ = {gamma} on a time-symmetric constant series"),
    );

    // Breach probability: p_M at γ = 1 (up to the Φ/Φ⁻¹ round-trip),
    // then strictly increasing in γ and inside (p_M, 0.5).
    let grid: Vec<f64> = (0..=20).map(|i| 1.0 + 0.1 * i as f64).collect();
    let probs: Vec<f64> = grid
        .iter()
        .map(|&g| breach_probability(g, 0.01).unwrap())
        .collect();
    let at_one = (probs[0] - 0.01).abs() <= 1e-8;
    let increasing = probs.windows(2).all(|p| p[1] > p[0]);
    let bounded = probs[1..].iter().all(|&p| p > 0.01 && p < 0.5);
    gate.check(
        at_one && increasing && bounded,
        format!(
            "breach probability equals p_M at γ=1, strictly increasing, inside (p_M, 0.5): {:.4} → {:.4}",
            probs[0],
            probs[probs.len() - 1]
        ),
    );

    // Tail probability: decreasing in the loss level and, beyond the
    // stressed margin, decreasing in the tail index.
    let m_star = 170.0;
    let xs: Vec<f64> = (0..40).map(|i| m_star + 10.0 * i as f64).collect();
    let in_x: Vec<f64> = xs
        .iter()
        .map(|&x| pareto_tail_prob(x, m_star, 0.12, 3.3).unwrap())
        .collect();
    let dec_in_x = in_x.windows(2).all(|p| p[1] < p[0]);
    let alphas: Vec<f64> = (0..30).map(|i| 1.2 + 0.3 * i as f64).collect();
    let in_a: Vec<f64> = alphas
        .iter()
        .map(|&a| pareto_tail_prob(300.0, m_star, 0.12, a).unwrap())
        .collect();
    let dec_in_a = in_a.windows(2).all(|p| p[1] < p[0]);
    gate.check(
        dec_in_x && dec_in_a,
        "tail probability decreasing in the loss level and the tail index".to_string(),
    );

    gate.finish();
}
