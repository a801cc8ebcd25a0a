//! Domain types and the analytic loss model.
//!
//! A clearing member posts initial margin M and a default-fund contribution
//! D to the clearinghouse. When another member defaults, the mark-to-market
//! move ΔV over the liquidation period is absorbed first by the defaulter's
//! own (stressed) collateral; the excess
//!
//! ```text
//!     U = (ΔV − M* − D*)⁺,      M* = w·M,  D* = w·D
//! ```
//!
//! is mutualised across survivors in proportion to their fund
//! contributions. From the reporting member's seat (index 0 of the roster)
//! the allocated share of a scenario `s` of simultaneous defaults is
//!
//! ```text
//!     A₀(s) = D₀ / (D_tot − Σ_{j∈s} D_j).
//! ```
//!
//! Conditional on a default, the loss tail beyond the stressed margin is
//! modelled as Pareto: P[ΔV > x] = p̂·(M*/x)^α for x ≥ M*, which gives the
//! expected uncollateralised loss in closed form,
//!
//! ```text
//!     Ū = (w·p̂/(α−1)) · (M/(M+D))^α · (M+D),          α > 1,
//! ```
//!
//! and a per-member exposure Ē_k = Ū_k/(D_tot − D_k)·(1+ε_k), where ε_k is
//! the multi-default correction computed by the scenario engine. The total
//! expected cost of membership over a horizon T, with flat hazards λ_k and a
//! flat short rate r, is
//!
//! ```text
//!     C₀(T) = D₀ · Σ_k Ē_k · λ_k · (1 − e^{−rT})/r      (→ λ_k·T as r→0).
//! ```
//!
//! All values are plain `f64` in one currency unit; every type here is
//! immutable after construction and every operation is a pure function,
//! so the whole module is safe to share across threads.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Days-per-year used to convert period lengths to year fractions (ACT/365).
pub const DAYS_PER_YEAR: f64 = 365.0;

/// One clearing member: collateral on deposit plus credit inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClearingMember {
    /// Identifier used in reports and error messages.
    pub id: String,
    /// Initial margin M on deposit, in currency units.
    pub initial_margin: f64,
    /// Default-fund contribution D, in currency units.
    pub default_fund: f64,
    /// CDS spread as a decimal per annum (0.02 = 200 bps).
    pub cds_spread: f64,
    /// Expected recovery on the member's debt, in [0, 1).
    pub recovery: f64,
    /// Default intensity per annum; `spread / (1 − recovery)` unless
    /// supplied directly.
    pub hazard: f64,
}

impl ClearingMember {
    /// Builds a member, deriving the hazard from spread and recovery.
    pub fn new(
        id: impl Into<String>,
        initial_margin: f64,
        default_fund: f64,
        cds_spread: f64,
        recovery: f64,
    ) -> Result<Self> {
        let hazard = hazard_from_spread(cds_spread, recovery)?;
        Self::with_hazard(id, initial_margin, default_fund, cds_spread, recovery, hazard)
    }

    /// Builds a member with an explicitly supplied hazard rate.
    pub fn with_hazard(
        id: impl Into<String>,
        initial_margin: f64,
        default_fund: f64,
        cds_spread: f64,
        recovery: f64,
        hazard: f64,
    ) -> Result<Self> {
        let id = id.into();
        for (what, value) in [
            ("initial margin", initial_margin),
            ("default fund", default_fund),
            ("CDS spread", cds_spread),
            ("hazard", hazard),
        ] {
            if !(value >= 0.0) {
                return Err(Error::NegativeInput { what, value });
            }
        }
        if !(0.0..1.0).contains(&recovery) {
            return Err(Error::InvalidRecovery { recovery });
        }
        if initial_margin == 0.0 && default_fund == 0.0 {
            return Err(Error::InactiveMember { id });
        }
        Ok(Self {
            id,
            initial_margin,
            default_fund,
            cds_spread,
            recovery,
            hazard,
        })
    }

    /// Total collateral M + D posted by this member.
    pub fn posted_collateral(&self) -> f64 {
        self.initial_margin + self.default_fund
    }
}

/// The clearinghouse as seen from one member's seat.
///
/// `members[0]` is the reporting member whose collateral is at risk; the
/// remaining entries are the counterparties whose defaults generate losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcpStructure {
    pub members: Vec<ClearingMember>,
    /// Clearinghouse equity sitting between the defaulter's collateral and
    /// the mutualised fund. The analytic engine works with the conservative
    /// choice E = 0; the field is carried for scenario comparisons.
    pub equity: f64,
    /// Days to liquidate a defaulted book.
    pub liquidation_days: u32,
    /// Days until mutualised losses are allocated and the fund replenished.
    pub recap_days: u32,
    /// Margin-model confidence tail mass (0.01 means margin covers losses at
    /// 99% confidence), in (0, 0.5).
    pub margin_confidence: f64,
}

impl CcpStructure {
    pub fn new(
        members: Vec<ClearingMember>,
        equity: f64,
        liquidation_days: u32,
        recap_days: u32,
        margin_confidence: f64,
    ) -> Result<Self> {
        if members.len() < 2 {
            return Err(Error::InvalidRoster {
                reason: format!("need at least 2 members, got {}", members.len()),
            });
        }
        if !(equity >= 0.0) {
            return Err(Error::NegativeInput {
                what: "equity",
                value: equity,
            });
        }
        if liquidation_days == 0 {
            return Err(Error::NonPositive {
                what: "liquidation period",
                value: 0.0,
            });
        }
        if recap_days < liquidation_days {
            return Err(Error::InvalidRoster {
                reason: format!(
                    "recap period ({recap_days}d) shorter than liquidation period ({liquidation_days}d)"
                ),
            });
        }
        if !(margin_confidence > 0.0 && margin_confidence < 0.5) {
            return Err(Error::OutOfRange {
                what: "margin confidence tail mass",
                range: "(0, 0.5)",
                value: margin_confidence,
            });
        }
        Ok(Self {
            members,
            equity,
            liquidation_days,
            recap_days,
            margin_confidence,
        })
    }

    /// The reporting member (roster index 0).
    pub fn reporting(&self) -> &ClearingMember {
        &self.members[0]
    }

    /// All members other than the reporting one, in roster order.
    pub fn others(&self) -> &[ClearingMember] {
        &self.members[1..]
    }

    /// Total default fund, recomputed from the roster on every call so it
    /// can never go stale.
    pub fn total_default_fund(&self) -> f64 {
        self.members.iter().map(|m| m.default_fund).sum()
    }

    /// Recap period as a year fraction (ACT/365).
    pub fn recap_year_fraction(&self) -> f64 {
        f64::from(self.recap_days) / DAYS_PER_YEAR
    }

    /// Marginal probability that a member defaults within one recap period:
    /// 1 − exp(−λ·Δ_r).
    pub fn period_default_prob(&self, member: &ClearingMember) -> f64 {
        -(-member.hazard * self.recap_year_fraction()).exp_m1()
    }
}

/// Builds a roster of `total_members` identical members (index 0 becomes the
/// reporting member). Handy for symmetric stress grids and tests.
pub fn homogeneous_roster(
    total_members: usize,
    initial_margin: f64,
    default_fund: f64,
    cds_spread: f64,
    recovery: f64,
    liquidation_days: u32,
    recap_days: u32,
) -> Result<CcpStructure> {
    let members = (0..total_members)
        .map(|i| {
            ClearingMember::new(
                format!("M{i:02}"),
                initial_margin,
                default_fund,
                cds_spread,
                recovery,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    CcpStructure::new(members, 0.0, liquidation_days, recap_days, 0.01)
}

/// The four market parameters the calibration layer estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketCalibration {
    /// Wrong-way factor w: stressed-to-current collateral ratio at default.
    pub wrong_way_factor: f64,
    /// Contagion factor γ: post-default to pre-default volatility ratio.
    pub contagion_factor: f64,
    /// Probability p̂ that liquidation losses breach the stressed margin,
    /// conditional on the member defaulting.
    pub breach_probability: f64,
    /// Pareto tail index α of the loss distribution beyond the margin.
    pub pareto_index: f64,
}

impl MarketCalibration {
    pub fn new(
        wrong_way_factor: f64,
        contagion_factor: f64,
        breach_probability: f64,
        pareto_index: f64,
    ) -> Result<Self> {
        if !(wrong_way_factor >= 1.0) {
            return Err(Error::OutOfRange {
                what: "wrong-way factor",
                range: "[1, inf)",
                value: wrong_way_factor,
            });
        }
        if !(contagion_factor >= 1.0) {
            return Err(Error::ContagionBelowOne {
                gamma: contagion_factor,
            });
        }
        if !(breach_probability > 0.0 && breach_probability < 1.0) {
            return Err(Error::OutOfRange {
                what: "breach probability",
                range: "(0, 1)",
                value: breach_probability,
            });
        }
        if !(pareto_index > 1.0) {
            return Err(Error::InfiniteMeanTail {
                alpha: pareto_index,
            });
        }
        Ok(Self {
            wrong_way_factor,
            contagion_factor,
            breach_probability,
            pareto_index,
        })
    }
}

/// Flat continuously compounded discount curve: Z(0, t) = exp(−r·t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscountCurve {
    pub rate: f64,
}

impl DiscountCurve {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate >= 0.0) {
            return Err(Error::NegativeInput {
                what: "discount rate",
                value: rate,
            });
        }
        Ok(Self { rate })
    }

    pub fn factor(&self, t_years: f64) -> f64 {
        (-self.rate * t_years).exp()
    }

    /// ∫₀ᵀ e^{−rt} dt = (1 − e^{−rT})/r, with the exact T limit at r = 0.
    pub fn annuity(&self, t_years: f64) -> f64 {
        if self.rate == 0.0 {
            t_years
        } else {
            -(-self.rate * t_years).exp_m1() / self.rate
        }
    }
}

/// One row of the final report: the reporting member's view of member k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberRiskRow {
    pub id: String,
    /// Expected uncollateralised loss Ū_k given k defaults.
    pub tail_loss: f64,
    /// Multi-default correction ε_k.
    pub epsilon: f64,
    /// Exposure Ē_k: expected allocated loss per unit of the reporting
    /// member's fund contribution, given k defaults in a period.
    pub exposure: f64,
    /// Contribution of member k to the total charge C₀(T).
    pub charge_contribution: f64,
}

/// Headline numbers of a risk run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskTotals {
    /// Expected loss of the reporting member's collateral over the horizon.
    pub charge: f64,
    /// w·p̂/(α−1): notional of one-year default protection per unit of
    /// posted collateral that hedges the exposure.
    pub lgd_total: f64,
    /// Charge as a fraction of average posted collateral (M+G).
    pub charge_fraction: f64,
    /// Duration-weighted average hazard λ̄ = (1/T)∫λ·Z dt.
    pub average_hazard: f64,
}

/// Full output of a charge computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub rows: Vec<MemberRiskRow>,
    pub totals: RiskTotals,
}

/// Simplified homogeneous-roster cost summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplifiedCharge {
    /// LGD_tot = w·p̂/(α−1).
    pub lgd_total: f64,
    /// C̄₀ = LGD_tot·λ̄·T, the charge as a fraction of posted collateral.
    pub charge_fraction: f64,
    /// C̄₀ scaled by the average posted collateral M + G.
    pub charge: f64,
}

/// Default intensity implied by a CDS spread: λ = spread / (1 − recovery).
pub fn hazard_from_spread(spread: f64, recovery: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&recovery) {
        return Err(Error::InvalidRecovery { recovery });
    }
    if !(spread >= 0.0) {
        return Err(Error::NegativeInput {
            what: "CDS spread",
            value: spread,
        });
    }
    Ok(spread / (1.0 - recovery))
}

/// Loss left over after the defaulter's stressed collateral is applied:
/// (ΔV − M* − D*)⁺. Positive ΔV is a loss.
pub fn uncollateralised_loss(delta_v: f64, m_star: f64, d_star: f64) -> f64 {
    debug_assert!(m_star >= 0.0 && d_star >= 0.0);
    (delta_v - m_star - d_star).max(0.0)
}

/// Collateral marked up by the wrong-way factor: (w·M, w·D).
pub fn stressed_collateral(member: &ClearingMember, w: f64) -> (f64, f64) {
    debug_assert!(w >= 0.0);
    (w * member.initial_margin, w * member.default_fund)
}

/// The reporting member's share of excess losses when the members in
/// `defaulted` (roster indices, excluding 0) have defaulted:
/// D₀ / (D_tot − Σ_{j∈s} D_j).
///
/// The share grows as more members default, because the surviving fund
/// shrinks; it is invariant under a homogeneous stress of all fund levels
/// (any common factor cancels).
///
/// # Errors
/// Empty set, a set containing the reporting member, an out-of-range index,
/// or a duplicated index are scenario errors; a defaulted set whose
/// contributions reach the whole fund is a fund-exhaustion error.
pub fn allocation_fraction(ccp: &CcpStructure, defaulted: &[usize]) -> Result<f64> {
    if defaulted.is_empty() {
        return Err(Error::InvalidScenario {
            reason: "empty default set".into(),
        });
    }
    let mut seen = vec![false; ccp.members.len()];
    let mut defaulted_fund = 0.0;
    for &j in defaulted {
        if j == 0 {
            return Err(Error::InvalidScenario {
                reason: "default set contains the reporting member".into(),
            });
        }
        if j >= ccp.members.len() {
            return Err(Error::InvalidScenario {
                reason: format!("member index {j} out of range"),
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
    Ok(ccp.reporting().default_fund / remaining)
}

/// Pareto tail of the conditional loss distribution: P[ΔV > x] = p̂·(M*/x)^α
/// for x ≥ M* > 0.
pub fn pareto_tail_prob(x: f64, m_star: f64, p_hat: f64, alpha: f64) -> Result<f64> {
    if !(m_star > 0.0) {
        return Err(Error::NonPositive {
            what: "stressed margin",
            value: m_star,
        });
    }
    if x < m_star {
        return Err(Error::BelowTailAnchor { x, m_star });
    }
    if !(p_hat > 0.0 && p_hat < 1.0) {
        return Err(Error::OutOfRange {
            what: "breach probability",
            range: "(0, 1)",
            value: p_hat,
        });
    }
    if !(alpha > 0.0) {
        return Err(Error::NonPositive {
            what: "tail index",
            value: alpha,
        });
    }
    Ok(p_hat * (m_star / x).powf(alpha))
}

/// Expected uncollateralised loss given the member defaults, in closed form:
///
/// ```text
///     Ū = (w·p̂/(α−1)) · (M/(M+D))^α · (M+D)
/// ```
///
/// This is the mean of (ΔV − M* − D*)⁺ under the Pareto tail anchored at the
/// stressed margin M* = w·M; it is positively homogeneous of degree one in
/// (M, D) and linear in both w and p̂. Requires α > 1 (finite tail mean) and
/// M > 0 (non-degenerate tail scale).
pub fn conditional_expected_tail_loss(
    member: &ClearingMember,
    cal: &MarketCalibration,
) -> Result<f64> {
    let alpha = cal.pareto_index;
    if !(alpha > 1.0) {
        return Err(Error::InfiniteMeanTail { alpha });
    }
    let m = member.initial_margin;
    let d = member.default_fund;
    if !(m > 0.0) {
        return Err(Error::DegenerateMargin {
            id: member.id.clone(),
        });
    }
    let w = cal.wrong_way_factor;
    let p_hat = cal.breach_probability;
    Ok(w * p_hat / (alpha - 1.0) * (m / (m + d)).powf(alpha) * (m + d))
}

/// Exposure of the reporting member to member k, per unit of its own fund
/// contribution:
///
/// ```text
///     Ē_k = Ū_k / (D_tot − D_k) · (1 + ε_k)
/// ```
///
/// `epsilon_k` is the multi-default correction from the scenario engine
/// (0 recovers the single-default approximation).
pub fn member_exposure(
    member: &ClearingMember,
    ccp: &CcpStructure,
    cal: &MarketCalibration,
    epsilon_k: f64,
) -> Result<f64> {
    let d_tot = ccp.total_default_fund();
    let remaining = d_tot - member.default_fund;
    if remaining <= 0.0 {
        return Err(Error::FundExhausted {
            defaulted: member.default_fund,
            total: d_tot,
        });
    }
    let tail_loss = conditional_expected_tail_loss(member, cal)?;
    Ok(tail_loss / remaining * (1.0 + epsilon_k))
}

/// Expected loss of the reporting member's collateral over `horizon_years`.
///
/// Per-member contributions are D₀·Ē_k·λ_k·(1−e^{−rT})/r with the exact
/// λ_k·T limit at r = 0; the report's totals also carry the simplified
/// summary quantities (LGD_tot, λ̄, C̄₀) computed from roster averages.
///
/// `epsilons` must hold one correction per non-reporting member, in roster
/// order (`ccp.others()`).
pub fn total_charge(
    ccp: &CcpStructure,
    cal: &MarketCalibration,
    epsilons: &[f64],
    curve: &DiscountCurve,
    horizon_years: f64,
) -> Result<RiskReport> {
    if !(horizon_years > 0.0) {
        return Err(Error::NonPositive {
            what: "horizon",
            value: horizon_years,
        });
    }
    let others = ccp.others();
    if epsilons.len() != others.len() {
        return Err(Error::InvalidScenario {
            reason: format!(
                "got {} correction terms for {} non-reporting members",
                epsilons.len(),
                others.len()
            ),
        });
    }
    let d0 = ccp.reporting().default_fund;
    let annuity = curve.annuity(horizon_years);

    let mut rows = Vec::with_capacity(others.len());
    let mut charge = 0.0;
    for (member, &eps) in others.iter().zip(epsilons) {
        let tail_loss = conditional_expected_tail_loss(member, cal)?;
        let exposure = member_exposure(member, ccp, cal, eps)?;
        let contribution = d0 * exposure * member.hazard * annuity;
        charge += contribution;
        rows.push(MemberRiskRow {
            id: member.id.clone(),
            tail_loss,
            epsilon: eps,
            exposure,
            charge_contribution: contribution,
        });
    }

    // Summary quantities on roster averages: λ̄ is the duration-weighted
    // average hazard of the counterparties; collateral averages include the
    // reporting member (on a homogeneous roster every choice coincides).
    let mean_hazard =
        others.iter().map(|m| m.hazard).sum::<f64>() / others.len() as f64;
    let average_hazard = mean_hazard * annuity / horizon_years;
    let lgd_total = cal.wrong_way_factor * cal.breach_probability / (cal.pareto_index - 1.0);
    let charge_fraction = lgd_total * average_hazard * horizon_years;

    Ok(RiskReport {
        rows,
        totals: RiskTotals {
            charge,
            lgd_total,
            charge_fraction,
            average_hazard,
        },
    })
}

/// The homogeneous-roster shortcut: LGD_tot = w·p̂/(α−1) and
/// C̄₀ = LGD_tot·λ̄·T, scaled back up by the average posted collateral
/// M + G to give an absolute charge.
pub fn simplified_charge(
    avg_margin: f64,
    avg_fund: f64,
    cal: &MarketCalibration,
    lambda_bar: f64,
    horizon_years: f64,
) -> Result<SimplifiedCharge> {
    if !(cal.pareto_index > 1.0) {
        return Err(Error::InfiniteMeanTail {
            alpha: cal.pareto_index,
        });
    }
    for (what, value) in [
        ("average margin", avg_margin),
        ("average fund contribution", avg_fund),
        ("average hazard", lambda_bar),
        ("horizon", horizon_years),
    ] {
        if !(value >= 0.0) {
            return Err(Error::NegativeInput { what, value });
        }
    }
    let lgd_total =
        cal.wrong_way_factor * cal.breach_probability / (cal.pareto_index - 1.0);
    let charge_fraction = lgd_total * lambda_bar * horizon_years;
    Ok(SimplifiedCharge {
        lgd_total,
        charge_fraction,
        charge: charge_fraction * (avg_margin + avg_fund),
    })
}
