//! Historical estimation of the four market parameters.
//!
//! Everything starts from a daily price series. Three estimators share it:
//!
//! * **Wrong-way factor w** — backward EWMA volatility
//!   σ²_i = λ·σ²_{i−1} + (1−λ)·r²_i over h-day log-returns; w compares a
//!   high quantile σ* of that path against today's vol, either as the plain
//!   ratio σ*/σ₀ or through the margin map x ↦ e^{σ·g}−1 with
//!   g = Φ⁻¹(1−p_M).
//! * **Contagion γ and breach probability p̂** — a second, *forward* EWMA
//!   σ′²_i = λ′·σ′²_{i+1} + (1−λ′)·r²_i measures the volatility that
//!   materialised *after* each date; γ is a high quantile of σ′_i/σ_i, and
//!   the probability that liquidation losses breach a margin set to a
//!   (1−p_M) confidence under the old vol becomes p̂ = Φ(Φ⁻¹(p_M)/γ).
//! * **Pareto index α** — the loss tail is summarised by fitting
//!   P[X > x] = p·(q/x)^α to the empirical exceedance probabilities beyond
//!   the (1−p) quantile q of the h-day absolute changes; the fit is anchored
//!   at (q, p) exactly and α is chosen by least squares.
//!
//! [`calibrate_market`] chains the three into a [`MarketCalibration`], with
//! warm-up trimming, seeding and clamping choices recorded in
//! [`CalibrationDiagnostics`] rather than silently applied.

use crate::error::{Error, Result};
use crate::math::{empirical_quantile, norm_cdf, norm_inv_cdf};
use crate::model::MarketCalibration;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// A dated series of index or price levels, strictly increasing in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    observations: Vec<(NaiveDate, f64)>,
}

impl PriceSeries {
    pub fn new(observations: Vec<(NaiveDate, f64)>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::EmptySeries {
                what: "price series",
            });
        }
        for (i, (_, level)) in observations.iter().enumerate() {
            if !level.is_finite() {
                return Err(Error::NonPositiveLevel {
                    level: *level,
                    index: i,
                });
            }
        }
        for i in 1..observations.len() {
            if observations[i].0 <= observations[i - 1].0 {
                return Err(Error::UnorderedDates { index: i });
            }
        }
        Ok(Self { observations })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn levels(&self) -> impl Iterator<Item = f64> + '_ {
        self.observations.iter().map(|(_, l)| *l)
    }

    pub fn observations(&self) -> &[(NaiveDate, f64)] {
        &self.observations
    }
}

/// What a return value means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnKind {
    LogReturn,
    AbsoluteChange,
}

impl ReturnKind {
    fn name(self) -> &'static str {
        match self {
            ReturnKind::LogReturn => "log returns",
            ReturnKind::AbsoluteChange => "absolute changes",
        }
    }
}

/// h-day returns derived from a price series. `overlapping` steps one
/// observation at a time (h-fold overlap); otherwise windows are disjoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub horizon_days: u32,
    pub kind: ReturnKind,
    pub values: Vec<f64>,
    pub overlapping: bool,
}

/// ln(p_{i+h}/p_i); all levels must be positive.
pub fn log_returns(prices: &PriceSeries, horizon: u32, overlapping: bool) -> Result<ReturnSeries> {
    returns_impl(prices, horizon, overlapping, ReturnKind::LogReturn)
}

/// p_{i+h} − p_i, the raw level moves the loss model runs on.
pub fn absolute_changes(
    prices: &PriceSeries,
    horizon: u32,
    overlapping: bool,
) -> Result<ReturnSeries> {
    returns_impl(prices, horizon, overlapping, ReturnKind::AbsoluteChange)
}

fn returns_impl(
    prices: &PriceSeries,
    horizon: u32,
    overlapping: bool,
    kind: ReturnKind,
) -> Result<ReturnSeries> {
    if horizon == 0 {
        return Err(Error::NonPositive {
            what: "return horizon",
            value: 0.0,
        });
    }
    let h = horizon as usize;
    let levels: Vec<f64> = prices.levels().collect();
    if levels.len() <= h {
        return Err(Error::InsufficientData {
            reason: format!(
                "need more than {h} observations for {horizon}-day returns, got {}",
                levels.len()
            ),
        });
    }
    if kind == ReturnKind::LogReturn {
        if let Some(i) = levels.iter().position(|&l| l <= 0.0) {
            return Err(Error::NonPositiveLevel {
                level: levels[i],
                index: i,
            });
        }
    }
    let step = if overlapping { 1 } else { h };
    let values = (0..levels.len() - h)
        .step_by(step)
        .map(|i| match kind {
            ReturnKind::LogReturn => (levels[i + h] / levels[i]).ln(),
            ReturnKind::AbsoluteChange => levels[i + h] - levels[i],
        })
        .collect();
    Ok(ReturnSeries {
        horizon_days: horizon,
        kind,
        values,
        overlapping,
    })
}

/// Direction of an EWMA pass through time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolDirection {
    /// σ_i summarises returns up to and including i.
    Backward,
    /// σ′_i summarises returns from i onward.
    Forward,
}

/// An EWMA volatility path, one value per return observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolSeries {
    pub vols: Vec<f64>,
    pub direction: VolDirection,
    pub decay: f64,
}

impl VolSeries {
    /// Copy with `front` leading and `back` trailing observations dropped —
    /// the warm-up trim used before quantile estimation.
    pub fn trimmed(&self, front: usize, back: usize) -> Result<VolSeries> {
        if front + back >= self.vols.len() {
            return Err(Error::InsufficientData {
                reason: format!(
                    "warm-up trim of {front}+{back} leaves nothing of {} vol points",
                    self.vols.len()
                ),
            });
        }
        Ok(VolSeries {
            vols: self.vols[front..self.vols.len() - back].to_vec(),
            direction: self.direction,
            decay: self.decay,
        })
    }
}

fn check_ewma_inputs(returns: &ReturnSeries, decay: f64, seed_var: f64) -> Result<()> {
    if returns.values.is_empty() {
        return Err(Error::EmptySeries { what: "returns" });
    }
    if !(decay >= 0.0 && decay < 1.0) {
        return Err(Error::OutOfRange {
            what: "EWMA decay",
            range: "[0, 1)",
            value: decay,
        });
    }
    if !(seed_var > 0.0) {
        return Err(Error::NonPositive {
            what: "seed variance",
            value: seed_var,
        });
    }
    Ok(())
}

/// Backward EWMA variance: σ²_i = decay·σ²_{i−1} + (1−decay)·r²_i, with
/// `seed_var` as the variance state *before* the first observation (so the
/// first output already includes r₀).
pub fn ewma_backward(returns: &ReturnSeries, decay: f64, seed_var: f64) -> Result<VolSeries> {
    check_ewma_inputs(returns, decay, seed_var)?;
    let mut var = seed_var;
    let vols = returns
        .values
        .iter()
        .map(|r| {
            var = decay * var + (1.0 - decay) * r * r;
            var.sqrt()
        })
        .collect();
    Ok(VolSeries {
        vols,
        direction: VolDirection::Backward,
        decay,
    })
}

/// Forward EWMA variance: σ′²_i = decay·σ′²_{i+1} + (1−decay)·r²_i, run
/// from the last observation toward the first. Deliberately its own loop
/// rather than reverse/delegate/reverse, so the time-reversal duality with
/// [`ewma_backward`] is a real cross-check and not a tautology.
pub fn ewma_forward(returns: &ReturnSeries, decay: f64, seed_var: f64) -> Result<VolSeries> {
    check_ewma_inputs(returns, decay, seed_var)?;
    let n = returns.values.len();
    let mut vols = vec![0.0; n];
    let mut var = seed_var;
    for i in (0..n).rev() {
        let r = returns.values[i];
        var = decay * var + (1.0 - decay) * r * r;
        vols[i] = var.sqrt();
    }
    Ok(VolSeries {
        vols,
        direction: VolDirection::Forward,
        decay,
    })
}

/// Empirical `q`-quantile of a volatility path (linear interpolation
/// between order statistics; `q` may be 1.0 for the maximum).
pub fn stress_quantile(vols: &VolSeries, q: f64) -> Result<f64> {
    empirical_quantile(&vols.vols, q)
}

/// How margin requirements respond to volatility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolMapping {
    /// Margin proportional to vol: w = σ*/σ₀.
    Linear,
    /// Margin covering a (1−p_M) move of a lognormal factor:
    /// w = (e^{σ*·g}−1)/(e^{σ₀·g}−1), g = Φ⁻¹(1−p_M).
    Exponential,
}

/// Wrong-way factor: stressed-to-current margin ratio implied by the vol
/// path. σ* is the `q`-quantile of `vols`; `current_vol` is σ₀.
///
/// The linear mapping is scale-free in the vols; the exponential one
/// converges to it as vols shrink. The raw ratio may come out below 1 on a
/// path whose stress quantile sits under today's vol — clamping is the
/// pipeline's decision, not this function's.
pub fn wrong_way_factor(
    vols: &VolSeries,
    current_vol: f64,
    q: f64,
    mapping: VolMapping,
    margin_confidence: f64,
) -> Result<f64> {
    if !(current_vol > 0.0) {
        return Err(Error::ZeroVolatility {
            what: "current volatility",
        });
    }
    if vols.vols.iter().any(|&v| v <= 0.0) {
        return Err(Error::ZeroVolatility {
            what: "volatility path",
        });
    }
    let sigma_star = stress_quantile(vols, q)?;
    match mapping {
        VolMapping::Linear => Ok(sigma_star / current_vol),
        VolMapping::Exponential => {
            if !(margin_confidence > 0.0 && margin_confidence < 0.5) {
                return Err(Error::OutOfRange {
                    what: "margin confidence tail mass",
                    range: "(0, 0.5)",
                    value: margin_confidence,
                });
            }
            let g = norm_inv_cdf(1.0 - margin_confidence);
            Ok((sigma_star * g).exp_m1() / (current_vol * g).exp_m1())
        }
    }
}

/// Contagion factor: the `q`-quantile of the per-date ratio σ′_i/σ_i of
/// realised-after to estimated-before volatility.
pub fn contagion_factor(back: &VolSeries, fwd: &VolSeries, q: f64) -> Result<f64> {
    if back.direction != VolDirection::Backward {
        return Err(Error::WrongSeriesKind {
            expected: "backward vols",
            got: "forward vols",
        });
    }
    if fwd.direction != VolDirection::Forward {
        return Err(Error::WrongSeriesKind {
            expected: "forward vols",
            got: "backward vols",
        });
    }
    if back.vols.len() != fwd.vols.len() {
        return Err(Error::MisalignedSeries {
            back: back.vols.len(),
            fwd: fwd.vols.len(),
        });
    }
    if back.vols.iter().any(|&v| v <= 0.0) {
        return Err(Error::ZeroVolatility {
            what: "backward volatility in contagion ratio",
        });
    }
    let ratios: Vec<f64> = fwd
        .vols
        .iter()
        .zip(&back.vols)
        .map(|(f, b)| f / b)
        .collect();
    empirical_quantile(&ratios, q)
}

/// Probability that liquidation losses breach a margin set at (1−p_M)
/// confidence under pre-default volatility, when the realised volatility is
/// γ times larger: p̂ = Φ(Φ⁻¹(p_M)/γ).
///
/// Identity at γ = 1, strictly increasing in γ, and capped below 1/2 (even
/// infinite contagion cannot make a zero-median loss breach more often than
/// half the time).
pub fn breach_probability(gamma: f64, margin_confidence: f64) -> Result<f64> {
    if !(gamma >= 1.0) {
        return Err(Error::ContagionBelowOne { gamma });
    }
    if !(margin_confidence > 0.0 && margin_confidence < 0.5) {
        return Err(Error::OutOfRange {
            what: "margin confidence tail mass",
            range: "(0, 0.5)",
            value: margin_confidence,
        });
    }
    Ok(norm_cdf(norm_inv_cdf(margin_confidence) / gamma))
}

/// Which side of the change distribution feeds the tail fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailSide {
    /// Pool |x| over all changes (default: losses can sit on either side
    /// of a cleared book).
    Both,
    /// Positive changes only.
    Up,
    /// Negative changes only, sign flipped.
    Down,
}

/// Objective space for the least-squares tail fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitSpace {
    /// Squared differences of exceedance probabilities.
    Probability,
    /// Squared differences of log exceedance probabilities.
    LogProbability,
}

/// Result of the Pareto tail fit. The model P[X > x] = p·(q/x)^α passes
/// through the anchor (q, p) exactly; only α is fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFit {
    pub alpha: f64,
    /// Anchor quantile q: the empirical (1 − anchor_prob) quantile.
    pub anchor: f64,
    pub anchor_prob: f64,
    /// Least-squares objective at the fitted α.
    pub goodness_of_fit: f64,
    /// Observations strictly beyond the anchor.
    pub tail_count: usize,
    /// Tail index a Gaussian distribution would present under this
    /// procedure, for judging whether a fit is genuinely fat-tailed.
    pub gaussian_reference_alpha: f64,
}

/// How heavy a tail would look if returns were normal; fits materially
/// below this indicate genuinely fat tails.
pub const GAUSSIAN_REFERENCE_ALPHA: f64 = 7.0;

const ALPHA_SCAN_LO: f64 = 1.1;
const ALPHA_SCAN_HI: f64 = 12.0;
const ALPHA_SCAN_STEP: f64 = 0.05;
const ALPHA_REFINE_TOL: f64 = 1e-3;
const MIN_FIT_OBS: usize = 500;
const MIN_TAIL_OBS: usize = 10;

/// Magnitudes entering the tail fit, per side convention.
fn pooled_magnitudes(changes: &ReturnSeries, side: TailSide) -> Vec<f64> {
    match side {
        TailSide::Both => changes.values.iter().map(|x| x.abs()).collect(),
        TailSide::Up => changes.values.iter().copied().filter(|&x| x > 0.0).collect(),
        TailSide::Down => changes
            .values
            .iter()
            .filter(|&&x| x < 0.0)
            .map(|&x| -x)
            .collect(),
    }
}

/// [`pareto_fit_opts`] with the default conventions: both-sides pooling and
/// probability-space least squares.
pub fn pareto_fit(changes: &ReturnSeries, anchor_prob: f64) -> Result<ParetoFit> {
    pareto_fit_opts(changes, anchor_prob, TailSide::Both, FitSpace::Probability)
}

/// Fits the tail index α of P[X > x] = anchor_prob·(q/x)^α to h-day level
/// changes.
///
/// q is the empirical (1 − anchor_prob) quantile of the pooled magnitudes;
/// empirical exceedance probabilities use mid-rank positions
/// 1 − (rank + ½)/n over the *full* pooled sample, so the tail points line
/// up with the anchor's own probability scale. α is scanned over
/// [1.1, 12] in steps of 0.05 and the best bracket refined by golden
/// section to 10⁻³.
pub fn pareto_fit_opts(
    changes: &ReturnSeries,
    anchor_prob: f64,
    side: TailSide,
    space: FitSpace,
) -> Result<ParetoFit> {
    if changes.kind != ReturnKind::AbsoluteChange {
        return Err(Error::WrongSeriesKind {
            expected: ReturnKind::AbsoluteChange.name(),
            got: changes.kind.name(),
        });
    }
    if !(anchor_prob > 0.0 && anchor_prob <= 0.1) {
        return Err(Error::OutOfRange {
            what: "anchor probability",
            range: "(0, 0.1]",
            value: anchor_prob,
        });
    }
    let mut xs = pooled_magnitudes(changes, side);
    let n = xs.len();
    if n < MIN_FIT_OBS {
        return Err(Error::InsufficientData {
            reason: format!("tail fit needs at least {MIN_FIT_OBS} observations, got {n}"),
        });
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let anchor = empirical_quantile(&xs, 1.0 - anchor_prob)?;
    if !(anchor > 0.0) {
        return Err(Error::NonPositive {
            what: "tail anchor quantile",
            value: anchor,
        });
    }

    // Tail observations and their empirical exceedance probabilities on
    // full-sample mid-ranks.
    let first_beyond = xs.partition_point(|&x| x <= anchor);
    let tail = &xs[first_beyond..];
    if tail.len() < MIN_TAIL_OBS {
        return Err(Error::TailTooThin {
            beyond: tail.len(),
            min: MIN_TAIL_OBS,
        });
    }
    let emp: Vec<f64> = (first_beyond..n)
        .map(|rank| 1.0 - (rank as f64 + 0.5) / n as f64)
        .collect();

    let objective = |alpha: f64| -> f64 {
        tail.iter()
            .zip(&emp)
            .map(|(&x, &e)| {
                let model = anchor_prob * (anchor / x).powf(alpha);
                match space {
                    FitSpace::Probability => (e - model) * (e - model),
                    FitSpace::LogProbability => {
                        let d = e.ln() - model.ln();
                        d * d
                    }
                }
            })
            .sum()
    };

    // Coarse scan, then golden-section refinement of the best bracket.
    let steps = ((ALPHA_SCAN_HI - ALPHA_SCAN_LO) / ALPHA_SCAN_STEP).round() as usize;
    let grid: Vec<f64> = (0..=steps)
        .map(|i| ALPHA_SCAN_LO + i as f64 * ALPHA_SCAN_STEP)
        .collect();
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for (i, &a) in grid.iter().enumerate() {
        let v = objective(a);
        if v < best_val {
            best_val = v;
            best = i;
        }
    }
    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(steps)];
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let mut fa = objective(a);
    let mut fb = objective(b);
    while hi - lo > ALPHA_REFINE_TOL {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = objective(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = objective(b);
        }
    }
    let alpha = 0.5 * (lo + hi);

    Ok(ParetoFit {
        alpha,
        anchor,
        anchor_prob,
        goodness_of_fit: objective(alpha),
        tail_count: tail.len(),
        gaussian_reference_alpha: GAUSSIAN_REFERENCE_ALPHA,
    })
}

/// Everything [`calibrate_market`] needs to know beyond the data itself.
/// `Default` reproduces the standard conventions: 5-day overlapping
/// returns, λ = 0.99 / λ′ = 0.97, 99% quantiles, 1% margin confidence,
/// linear margin map, both-sides tail pooling, probability-space fit,
/// 100-point warm-up and 20-point seed windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub return_horizon_days: u32,
    pub overlapping: bool,
    pub backward_decay: f64,
    pub forward_decay: f64,
    pub quantile: f64,
    pub margin_confidence: f64,
    pub mapping: VolMapping,
    pub anchor_prob: f64,
    pub tail_side: TailSide,
    pub fit_space: FitSpace,
    /// Observations dropped from each affected end of a vol path before
    /// quantile estimation, while the EWMA forgets its seed.
    pub warmup: usize,
    /// Leading (resp. trailing) squared returns averaged into the backward
    /// (resp. forward) EWMA seed.
    pub seed_window: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            return_horizon_days: 5,
            overlapping: true,
            backward_decay: 0.99,
            forward_decay: 0.97,
            quantile: 0.99,
            margin_confidence: 0.01,
            mapping: VolMapping::Linear,
            anchor_prob: 0.01,
            tail_side: TailSide::Both,
            fit_space: FitSpace::Probability,
            warmup: 100,
            seed_window: 20,
        }
    }
}

/// One point of the tail scatter: an observation, its empirical exceedance
/// probability, and the fitted model value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub x: f64,
    pub empirical: f64,
    pub fitted: f64,
}

/// Where the calibrated numbers came from: raw (pre-clamp) estimates, the
/// vol paths behind them, and the tail scatter behind α. Typical reported
/// ranges for comparable markets are w ∈ [1.2, 2.6] and γ ∈ [1.8, 2.8];
/// the `*_in_typical_band` flags report (and only report) that comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationDiagnostics {
    pub n_observations: usize,
    pub n_returns: usize,
    pub current_vol: f64,
    pub stress_vol: f64,
    pub raw_wrong_way: f64,
    pub raw_contagion: f64,
    pub wrong_way_clamped: bool,
    pub contagion_clamped: bool,
    pub warmup_dropped: usize,
    pub pareto: ParetoFit,
    pub backward_vols: Vec<f64>,
    pub forward_vols: Vec<f64>,
    pub vol_ratios: Vec<f64>,
    pub tail_points: Vec<TailPoint>,
    pub wrong_way_in_typical_band: bool,
    pub contagion_in_typical_band: bool,
}

/// A full calibration: the four parameters plus the evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOutcome {
    pub market: MarketCalibration,
    pub diagnostics: CalibrationDiagnostics,
}

fn validate_config(cfg: &CalibrationConfig) -> Result<()> {
    if cfg.return_horizon_days == 0 {
        return Err(Error::NonPositive {
            what: "return horizon",
            value: 0.0,
        });
    }
    for (what, value) in [
        ("backward EWMA decay", cfg.backward_decay),
        ("forward EWMA decay", cfg.forward_decay),
    ] {
        if !(value > 0.0 && value < 1.0) {
            return Err(Error::OutOfRange {
                what,
                range: "(0, 1)",
                value,
            });
        }
    }
    if !(cfg.quantile > 0.0 && cfg.quantile <= 1.0) {
        return Err(Error::OutOfRange {
            what: "stress quantile",
            range: "(0, 1]",
            value: cfg.quantile,
        });
    }
    if !(cfg.margin_confidence > 0.0 && cfg.margin_confidence < 0.5) {
        return Err(Error::OutOfRange {
            what: "margin confidence tail mass",
            range: "(0, 0.5)",
            value: cfg.margin_confidence,
        });
    }
    if !(cfg.anchor_prob > 0.0 && cfg.anchor_prob <= 0.1) {
        return Err(Error::OutOfRange {
            what: "anchor probability",
            range: "(0, 0.1]",
            value: cfg.anchor_prob,
        });
    }
    if cfg.seed_window == 0 {
        return Err(Error::NonPositive {
            what: "seed window",
            value: 0.0,
        });
    }
    Ok(())
}

/// Minimum vol observations that must survive warm-up trimming for the
/// stress and contagion quantiles to mean anything.
const MIN_QUANTILE_OBS: usize = 100;

/// Runs the full estimation pipeline on one price series.
///
/// Wrong-way and contagion estimates below 1 are clamped up to 1 — the
/// downstream model takes w ≥ 1 and γ ≥ 1 by assumption — with the raw
/// values and clamp flags preserved in the diagnostics.
pub fn calibrate_market(
    prices: &PriceSeries,
    cfg: &CalibrationConfig,
) -> Result<CalibrationOutcome> {
    validate_config(cfg)?;
    let rets = log_returns(prices, cfg.return_horizon_days, cfg.overlapping)?;
    let changes = absolute_changes(prices, cfg.return_horizon_days, cfg.overlapping)?;
    let n = rets.values.len();
    if n < 2 * cfg.warmup + MIN_QUANTILE_OBS {
        return Err(Error::InsufficientData {
            reason: format!(
                "need at least {} returns for warm-up plus quantiles, got {n}",
                2 * cfg.warmup + MIN_QUANTILE_OBS
            ),
        });
    }

    let seed_of = |window: &[f64]| -> f64 {
        window.iter().map(|r| r * r).sum::<f64>() / window.len() as f64
    };
    let k = cfg.seed_window.min(n);
    let seed_back = seed_of(&rets.values[..k]);
    let seed_fwd = seed_of(&rets.values[n - k..]);
    if !(seed_back > 0.0) || !(seed_fwd > 0.0) {
        return Err(Error::ZeroVolatility {
            what: "EWMA seed window (constant price series?)",
        });
    }

    let back = ewma_backward(&rets, cfg.backward_decay, seed_back)?;
    let fwd = ewma_forward(&rets, cfg.forward_decay, seed_fwd)?;
    let current_vol = *back.vols.last().expect("non-empty by construction");

    // Quantiles run on warm-up-trimmed paths: the backward path is unsettled
    // at the front, the forward path at the back, the ratio at both ends.
    let back_for_stress = back.trimmed(cfg.warmup, 0)?;
    let stress_vol = stress_quantile(&back_for_stress, cfg.quantile)?;
    let raw_wrong_way = wrong_way_factor(
        &back_for_stress,
        current_vol,
        cfg.quantile,
        cfg.mapping,
        cfg.margin_confidence,
    )?;
    let raw_contagion = contagion_factor(
        &back.trimmed(cfg.warmup, cfg.warmup)?,
        &fwd.trimmed(cfg.warmup, cfg.warmup)?,
        cfg.quantile,
    )?;

    let wrong_way = raw_wrong_way.max(1.0);
    let contagion = raw_contagion.max(1.0);
    let p_hat = breach_probability(contagion, cfg.margin_confidence)?;
    let fit = pareto_fit_opts(&changes, cfg.anchor_prob, cfg.tail_side, cfg.fit_space)?;

    let market = MarketCalibration::new(wrong_way, contagion, p_hat, fit.alpha)?;

    let mut pooled = pooled_magnitudes(&changes, cfg.tail_side);
    pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n_pooled = pooled.len();
    let first_beyond = pooled.partition_point(|&x| x <= fit.anchor);
    let tail_points: Vec<TailPoint> = (first_beyond..n_pooled)
        .map(|rank| {
            let x = pooled[rank];
            TailPoint {
                x,
                empirical: 1.0 - (rank as f64 + 0.5) / n_pooled as f64,
                fitted: fit.anchor_prob * (fit.anchor / x).powf(fit.alpha),
            }
        })
        .collect();

    let vol_ratios = fwd
        .vols
        .iter()
        .zip(&back.vols)
        .map(|(f, b)| f / b)
        .collect();

    let diagnostics = CalibrationDiagnostics {
        n_observations: prices.len(),
        n_returns: n,
        current_vol,
        stress_vol,
        raw_wrong_way,
        raw_contagion,
        wrong_way_clamped: raw_wrong_way < 1.0,
        contagion_clamped: raw_contagion < 1.0,
        warmup_dropped: cfg.warmup,
        pareto: fit,
        backward_vols: back.vols,
        forward_vols: fwd.vols,
        vol_ratios,
        tail_points,
        wrong_way_in_typical_band: (1.2..=2.6).contains(&wrong_way),
        contagion_in_typical_band: (1.8..=2.8).contains(&contagion),
    };

    Ok(CalibrationOutcome {
        market,
        diagnostics,
    })
}
