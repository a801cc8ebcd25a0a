//! Multi-default correction under a one-factor Gaussian copula.
//!
//! The analytic exposure treats defaults one at a time. When defaults
//! cluster, the surviving fund shrinks and each survivor absorbs a larger
//! share, so the single-default figure understates the loss. The correction
//! factor for member k is
//!
//! ```text
//!     ε_k = E[ 𝕀_{k∈s} · B_k(s) ] / P_k,
//!     B_k(s) = Σ_{j∈s∖{k}} D_j / (D_tot − Σ_{j∈s} D_j),
//! ```
//!
//! where s is the random set of defaults over one recap period and P_k the
//! marginal probability that k is in it. Joint defaults follow a one-factor
//! Gaussian copula: with a common factor Z and idiosyncratic ε_j
//! (independent standard normals), member j defaults iff
//!
//! ```text
//!     √ρ·Z + √(1−ρ)·ε_j ≤ Φ⁻¹(P_j),      P_j = 1 − e^{−λ_j·Δ_r}.
//! ```
//!
//! Two backends evaluate the same expectation: Monte Carlo with antithetic
//! pairs on Z ([`epsilon_mc`]), and exact enumeration of all subsets with
//! Gauss–Hermite integration over Z ([`epsilon_exact`], rosters of up to
//! 20 counterparties). Scenarios that wipe out the whole fund have no
//! finite allocation; both backends exclude them from ε and report their
//! probability mass separately, failing once it exceeds 0.1%.
//!
//! Monte Carlo runs are bit-reproducible: the sample range is cut into
//! fixed-size chunks, chunk i uses an RNG substream derived from
//! (`rng_seed`, stream = i), chunks are reduced in index order, and worker
//! threads only decide *when* a chunk is computed, never what it contains.

use crate::error::{Error, Result};
use crate::math::{norm_cdf, norm_inv_cdf};
use crate::model::{CcpStructure, ClearingMember, DAYS_PER_YEAR};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Samples per member below which rare-event standard errors are noise.
pub const MIN_MC_SAMPLES: u64 = 10_000;

/// Exact enumeration visits 2^N subsets; past this it stops being exact
/// in any useful sense of "finishes".
pub const MAX_EXACT_MEMBERS: usize = 20;

/// Pairs of antithetic draws per reproducibility chunk. Fixed: changing it
/// changes which substream generates which sample, i.e. the output.
const CHUNK_PAIRS: u64 = 1 << 14;

/// Share of sampled scenarios allowed to exhaust the fund before the
/// finite-allocation model is declared inapplicable.
const MAX_EXHAUSTED: f64 = 1e-3;

/// Which backend a config is meant for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    MonteCarlo,
    ExactEnumeration,
}

/// Everything the engine needs besides the roster itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEngineConfig {
    /// Copula factor loading ρ, in [0, 1).
    pub correlation: f64,
    /// Length of the joint-default window Δ_r in days; normally copied from
    /// [`CcpStructure::recap_days`].
    pub recap_days: u32,
    /// Total Monte Carlo samples (antithetic draws count individually).
    pub mc_samples: u64,
    pub rng_seed: u64,
    pub mode: SamplingMode,
    /// Gauss–Hermite node count for the exact backend.
    pub quadrature_points: usize,
}

impl ScenarioEngineConfig {
    /// Monte Carlo config with the window taken from the roster.
    pub fn monte_carlo(ccp: &CcpStructure, correlation: f64, mc_samples: u64, rng_seed: u64) -> Self {
        Self {
            correlation,
            recap_days: ccp.recap_days,
            mc_samples,
            rng_seed,
            mode: SamplingMode::MonteCarlo,
            quadrature_points: 64,
        }
    }

    /// Exact-enumeration config with the window taken from the roster.
    pub fn exact(ccp: &CcpStructure, correlation: f64) -> Self {
        Self {
            correlation,
            recap_days: ccp.recap_days,
            mc_samples: MIN_MC_SAMPLES,
            rng_seed: 0,
            mode: SamplingMode::ExactEnumeration,
            quadrature_points: 64,
        }
    }

    fn validate_correlation(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.correlation) {
            return Err(Error::OutOfRange {
                what: "copula correlation",
                range: "[0, 1)",
                value: self.correlation,
            });
        }
        Ok(())
    }
}

/// A realised set of defaults over one window: roster indices, ascending,
/// never containing the reporting member (index 0).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefaultScenario {
    pub defaulted: Vec<usize>,
}

/// Correction terms for every non-reporting member, in roster order
/// (element i describes roster index i + 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonResult {
    /// ε_k ≥ 0; zero for members that cannot default.
    pub epsilon: Vec<f64>,
    /// Monte Carlo standard error of ε_k; zeros from the exact backend.
    pub std_error: Vec<f64>,
    /// P_k = 1 − exp(−λ_k·Δ_r), the denominator of ε_k.
    pub marginal_default_prob: Vec<f64>,
    /// Achieved default frequency: empirical under MC, the quadrature's own
    /// marginal under exact enumeration (a built-in consistency check).
    pub observed_default_freq: Vec<f64>,
    /// Share of scenario mass discarded because the fund was exhausted.
    pub exhausted_fraction: f64,
    /// Monte Carlo samples actually drawn (0 for the exact backend).
    pub samples: u64,
}

/// Marginal window default probabilities P_j = 1 − exp(−λ_j·Δ_r) for a
/// slice of members.
fn window_default_probs(members: &[ClearingMember], recap_days: u32) -> Vec<f64> {
    let dt = f64::from(recap_days) / DAYS_PER_YEAR;
    members
        .iter()
        .map(|m| -(-m.hazard * dt).exp_m1())
        .collect()
}

/// Copula thresholds Φ⁻¹(P_j); −∞ for members that cannot default.
fn copula_thresholds(probs: &[f64]) -> Vec<f64> {
    probs.iter().map(|&p| norm_inv_cdf(p)).collect()
}

/// One draw of the joint-default indicator given the common factor `z` and
/// one idiosyncratic normal per member. Returns positions (0-based into
/// `thresholds`) of defaulted members, ascending.
fn defaults_for_draw(
    thresholds: &[f64],
    sqrt_rho: f64,
    sqrt_one_minus_rho: f64,
    z: f64,
    idio: &[f64],
    out: &mut Vec<usize>,
) {
    out.clear();
    for (j, (&t, &e)) in thresholds.iter().zip(idio).enumerate() {
        if sqrt_rho * z + sqrt_one_minus_rho * e <= t {
            out.push(j);
        }
    }
}

/// Draws one joint-default scenario for the counterparties `others`
/// (the roster minus the reporting member, i.e. [`CcpStructure::others`]).
/// Returned indices are roster indices: position in `others` plus one.
///
/// Member j defaults iff √ρ·Z + √(1−ρ)·ε_j ≤ Φ⁻¹(P_j) with Z drawn once
/// per call and ε_j fresh per member; the empty set is a perfectly good
/// outcome and by far the most common one.
pub fn joint_default_sample(
    others: &[ClearingMember],
    correlation: f64,
    recap_days: u32,
    rng: &mut impl Rng,
) -> Result<DefaultScenario> {
    if !(0.0..1.0).contains(&correlation) {
        return Err(Error::OutOfRange {
            what: "copula correlation",
            range: "[0, 1)",
            value: correlation,
        });
    }
    let thresholds = copula_thresholds(&window_default_probs(others, recap_days));
    let z: f64 = rng.sample(StandardNormal);
    let idio: Vec<f64> = (0..others.len())
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let mut positions = Vec::new();
    defaults_for_draw(
        &thresholds,
        correlation.sqrt(),
        (1.0 - correlation).sqrt(),
        z,
        &idio,
        &mut positions,
    );
    Ok(DefaultScenario {
        defaulted: positions.into_iter().map(|p| p + 1).collect(),
    })
}

/// Loss amplifier B_k(s) = Σ_{j∈s∖{k}} D_j / (D_tot − Σ_{j∈s} D_j): how much
/// fund the other defaulters burn, per unit of fund left standing.
///
/// Zero exactly when k defaults alone; unchanged when every D_j is scaled by
/// a common factor. `scenario` must contain `k` and stay clear of the
/// reporting member.
pub fn loss_amplifier(ccp: &CcpStructure, scenario: &DefaultScenario, k: usize) -> Result<f64> {
    let s = &scenario.defaulted;
    if s.is_empty() {
        return Err(Error::InvalidScenario {
            reason: "empty default set".into(),
        });
    }
    if !s.contains(&k) {
        return Err(Error::InvalidScenario {
            reason: format!("member {k} is not part of the scenario"),
        });
    }
    let mut seen = vec![false; ccp.members.len()];
    let mut defaulted_fund = 0.0;
    for &j in s {
        if j == 0 || j >= ccp.members.len() {
            return Err(Error::InvalidScenario {
                reason: format!("member index {j} out of range for defaults"),
            });
        }
        if seen[j] {
            return Err(Error::InvalidScenario {
                reason: format!("member index {j} repeated"),
            });
        }
        seen[j] = true;
        defaulted_fund += ccp.members[j].default_fund;
    }
    let total = ccp.total_default_fund();
    let remaining = total - defaulted_fund;
    if remaining <= 0.0 {
        return Err(Error::FundExhausted {
            defaulted: defaulted_fund,
            total,
        });
    }
    Ok((defaulted_fund - ccp.members[k].default_fund) / remaining)
}

/// Per-chunk accumulator for the Monte Carlo reduction. Merging is ordered
/// and associative-by-construction, so the final numbers cannot depend on
/// how rayon schedules the chunks.
struct ChunkSums {
    /// Σ over pairs of the pair-mean contribution 𝕀_{k∈s}·B_k(s).
    pair_sum: Vec<f64>,
    /// Σ of squared pair means, for the standard error.
    pair_sq_sum: Vec<f64>,
    /// Defaults observed per member (both halves of each pair).
    default_count: Vec<u64>,
    /// Samples whose scenario exhausted the fund.
    exhausted: u64,
}

impl ChunkSums {
    fn new(n: usize) -> Self {
        Self {
            pair_sum: vec![0.0; n],
            pair_sq_sum: vec![0.0; n],
            default_count: vec![0; n],
            exhausted: 0,
        }
    }

    fn merge(mut self, other: &Self) -> Self {
        for i in 0..self.pair_sum.len() {
            self.pair_sum[i] += other.pair_sum[i];
            self.pair_sq_sum[i] += other.pair_sq_sum[i];
            self.default_count[i] += other.default_count[i];
        }
        self.exhausted += other.exhausted;
        self
    }
}

/// Contribution of one sampled scenario (positions into `others`) to the
/// per-member numerators. Writes 𝕀·B into `contrib`; returns false when the
/// scenario exhausts the fund (contributions zeroed, sample counted by the
/// caller).
fn accumulate_scenario(
    positions: &[usize],
    funds: &[f64],
    d_total: f64,
    default_count: &mut [u64],
    contrib: &mut [f64],
) -> bool {
    contrib.iter_mut().for_each(|c| *c = 0.0);
    if positions.is_empty() {
        return true;
    }
    let mut defaulted_fund = 0.0;
    for &p in positions {
        defaulted_fund += funds[p];
        default_count[p] += 1;
    }
    let remaining = d_total - defaulted_fund;
    if remaining <= 0.0 {
        return false;
    }
    for &p in positions {
        contrib[p] = (defaulted_fund - funds[p]) / remaining;
    }
    true
}

/// Monte Carlo estimate of ε for every counterparty.
///
/// Antithetic pairs share the idiosyncratic draws and flip the sign of the
/// common factor: x_j = √ρ·z + √(1−ρ)·e_j and x'_j = −√ρ·z + √(1−ρ)·e_j.
/// Standard errors come from the spread of pair means, which stays honest
/// even though the two halves of a pair are dependent. Fixed seed ⇒
/// bit-identical output, independent of the rayon worker count.
pub fn epsilon_mc(ccp: &CcpStructure, cfg: &ScenarioEngineConfig) -> Result<EpsilonResult> {
    if cfg.mode != SamplingMode::MonteCarlo {
        return Err(Error::ModeMismatch {
            expected: "monte_carlo",
        });
    }
    cfg.validate_correlation()?;
    if cfg.mc_samples < MIN_MC_SAMPLES {
        return Err(Error::TooFewSamples {
            samples: cfg.mc_samples,
            min: MIN_MC_SAMPLES,
        });
    }

    let others = ccp.others();
    let n = others.len();
    let probs = window_default_probs(others, cfg.recap_days);
    let thresholds = copula_thresholds(&probs);
    let funds: Vec<f64> = others.iter().map(|m| m.default_fund).collect();
    let d_total = ccp.total_default_fund();
    let sqrt_rho = cfg.correlation.sqrt();
    let sqrt_omr = (1.0 - cfg.correlation).sqrt();

    let pairs = cfg.mc_samples.div_ceil(2);
    let samples = pairs * 2;
    let chunks = pairs.div_ceil(CHUNK_PAIRS);

    let chunk_results: Vec<ChunkSums> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
            rng.set_stream(chunk);
            let lo = chunk * CHUNK_PAIRS;
            let hi = pairs.min(lo + CHUNK_PAIRS);

            let mut sums = ChunkSums::new(n);
            let mut idio = vec![0.0f64; n];
            let mut positions = Vec::with_capacity(n);
            let mut contrib_a = vec![0.0f64; n];
            let mut contrib_b = vec![0.0f64; n];

            for _ in lo..hi {
                let z: f64 = rng.sample(StandardNormal);
                for e in idio.iter_mut() {
                    *e = rng.sample(StandardNormal);
                }

                defaults_for_draw(&thresholds, sqrt_rho, sqrt_omr, z, &idio, &mut positions);
                if !accumulate_scenario(
                    &positions,
                    &funds,
                    d_total,
                    &mut sums.default_count,
                    &mut contrib_a,
                ) {
                    sums.exhausted += 1;
                }

                defaults_for_draw(&thresholds, sqrt_rho, sqrt_omr, -z, &idio, &mut positions);
                if !accumulate_scenario(
                    &positions,
                    &funds,
                    d_total,
                    &mut sums.default_count,
                    &mut contrib_b,
                ) {
                    sums.exhausted += 1;
                }

                for k in 0..n {
                    let pm = 0.5 * (contrib_a[k] + contrib_b[k]);
                    sums.pair_sum[k] += pm;
                    sums.pair_sq_sum[k] += pm * pm;
                }
            }
            sums
        })
        .collect();

    let total = chunk_results
        .iter()
        .fold(ChunkSums::new(n), |acc, c| acc.merge(c));

    let exhausted_fraction = total.exhausted as f64 / samples as f64;
    if exhausted_fraction > MAX_EXHAUSTED {
        return Err(Error::ExhaustionRateTooHigh {
            rate: exhausted_fraction,
        });
    }

    let np = pairs as f64;
    let mut epsilon = vec![0.0; n];
    let mut std_error = vec![0.0; n];
    let mut observed = vec![0.0; n];
    for k in 0..n {
        observed[k] = total.default_count[k] as f64 / samples as f64;
        if probs[k] > 0.0 {
            let mean = total.pair_sum[k] / np;
            let var = (total.pair_sq_sum[k] - np * mean * mean) / (np - 1.0);
            epsilon[k] = mean / probs[k];
            std_error[k] = (var / np).max(0.0).sqrt() / probs[k];
        }
    }

    Ok(EpsilonResult {
        epsilon,
        std_error,
        marginal_default_prob: probs,
        observed_default_freq: observed,
        exhausted_fraction,
        samples,
    })
}

/// Exact ε by summing B_k(s)·P(s) over every non-empty subset of
/// counterparties.
///
/// Conditional on the common factor Z, defaults are independent with
/// p_j(Z) = Φ((Φ⁻¹(P_j) − √ρ·Z)/√(1−ρ)), so each subset's probability is a
/// Gauss–Hermite sum of products of p_j and (1 − p_j). The enumeration
/// walks subsets depth-first, extending a per-level buffer of partial
/// node-wise products — each of the 2^N branches costs one multiply per
/// node, and nothing is ever divided back out.
pub fn epsilon_exact(ccp: &CcpStructure, cfg: &ScenarioEngineConfig) -> Result<EpsilonResult> {
    if cfg.mode != SamplingMode::ExactEnumeration {
        return Err(Error::ModeMismatch {
            expected: "exact_enumeration",
        });
    }
    cfg.validate_correlation()?;
    let others = ccp.others();
    let n = others.len();
    if n > MAX_EXACT_MEMBERS {
        return Err(Error::RosterTooLarge { members: n });
    }
    if cfg.quadrature_points < 8 {
        return Err(Error::QuadratureTooCoarse {
            points: cfg.quadrature_points,
        });
    }

    let probs = window_default_probs(others, cfg.recap_days);
    let thresholds = copula_thresholds(&probs);
    let funds: Vec<f64> = others.iter().map(|m| m.default_fund).collect();
    let d_total = ccp.total_default_fund();

    // Physicists' Gauss–Hermite: ∫f(z)φ(z)dz = (1/√π)·Σ wᵢ·f(√2·xᵢ).
    let (nodes, weights) = crate::math::gauss_hermite(cfg.quadrature_points);
    let q = nodes.len();
    let ghw: Vec<f64> = weights
        .iter()
        .map(|w| w / std::f64::consts::PI.sqrt())
        .collect();

    // Conditional default probabilities p_j(z) per member per node.
    let sqrt_rho = cfg.correlation.sqrt();
    let sqrt_omr = (1.0 - cfg.correlation).sqrt();
    let cond: Vec<Vec<f64>> = thresholds
        .iter()
        .map(|&t| {
            nodes
                .iter()
                .map(|&x| {
                    let z = std::f64::consts::SQRT_2 * x;
                    if t.is_infinite() {
                        if t < 0.0 {
                            0.0
                        } else {
                            1.0
                        }
                    } else {
                        norm_cdf((t - sqrt_rho * z) / sqrt_omr)
                    }
                })
                .collect()
        })
        .collect();

    // Depth-first walk over subsets. levels[d] holds, per quadrature node,
    // the product of the first d members' inclusion/exclusion factors, so
    // each branch costs one multiply per node and no divisions ever undo a
    // factor. Depth is bounded by MAX_EXACT_MEMBERS, so recursion is safe.
    let walk = Walk {
        cond: &cond,
        ghw: &ghw,
        funds: &funds,
        d_total,
        n,
    };
    let mut levels: Vec<Vec<f64>> = vec![vec![0.0; q]; n + 1];
    levels[0].iter_mut().for_each(|v| *v = 1.0);
    let mut included: Vec<usize> = Vec::with_capacity(n);
    let mut acc = ExactAccumulator {
        numerator: vec![0.0; n],
        marginal: vec![0.0; n],
        exhausted_mass: 0.0,
    };
    walk.run(0, 0.0, &mut levels, &mut included, &mut acc);

    if acc.exhausted_mass > MAX_EXHAUSTED {
        return Err(Error::ExhaustionRateTooHigh {
            rate: acc.exhausted_mass,
        });
    }

    let epsilon: Vec<f64> = acc
        .numerator
        .iter()
        .zip(&probs)
        .map(|(&num, &p)| if p > 0.0 { num / p } else { 0.0 })
        .collect();

    Ok(EpsilonResult {
        epsilon,
        std_error: vec![0.0; n],
        marginal_default_prob: probs,
        observed_default_freq: acc.marginal,
        exhausted_fraction: acc.exhausted_mass,
        samples: 0,
    })
}

/// Read-only context of the exact subset walk.
struct Walk<'a> {
    /// Conditional default probabilities, [member][node].
    cond: &'a [Vec<f64>],
    /// Gauss–Hermite weights already divided by √π.
    ghw: &'a [f64],
    funds: &'a [f64],
    d_total: f64,
    n: usize,
}

/// Running totals of the exact subset walk.
struct ExactAccumulator {
    /// Σ_s P(s)·B_k(s) over non-exhausting scenarios containing k.
    numerator: Vec<f64>,
    /// Σ_s P(s) over scenarios containing k — must reproduce P_k.
    marginal: Vec<f64>,
    exhausted_mass: f64,
}

impl Walk<'_> {
    fn run(
        &self,
        depth: usize,
        fund_so_far: f64,
        levels: &mut [Vec<f64>],
        included: &mut Vec<usize>,
        acc: &mut ExactAccumulator,
    ) {
        if depth == self.n {
            if included.is_empty() {
                return;
            }
            let p_s: f64 = levels[self.n].iter().zip(self.ghw).map(|(v, w)| v * w).sum();
            for &p in included.iter() {
                acc.marginal[p] += p_s;
            }
            let remaining = self.d_total - fund_so_far;
            if remaining <= 0.0 {
                acc.exhausted_mass += p_s;
            } else {
                for &p in included.iter() {
                    acc.numerator[p] += p_s * (fund_so_far - self.funds[p]) / remaining;
                }
            }
            return;
        }

        let extend = |levels: &mut [Vec<f64>], include: bool| {
            let (head, tail) = levels.split_at_mut(depth + 1);
            for ((dst, src), pj) in tail[0]
                .iter_mut()
                .zip(&head[depth])
                .zip(&self.cond[depth])
            {
                *dst = src * if include { *pj } else { 1.0 - pj };
            }
        };

        extend(levels, false);
        self.run(depth + 1, fund_so_far, levels, included, acc);

        extend(levels, true);
        included.push(depth);
        self.run(
            depth + 1,
            fund_so_far + self.funds[depth],
            levels,
            included,
            acc,
        );
        included.pop();
    }
}
