//! Error type shared by the model, scenario, and calibration layers.
//!
//! Every fallible operation returns `Result<T, Error>`. Variants carry the
//! offending values so callers (and the CLI) can print actionable messages
//! without re-deriving context.

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Recovery rates live in [0, 1); a recovery of 1 makes the hazard
    /// `spread / (1 - recovery)` blow up.
    #[error("recovery must lie in [0, 1), got {recovery}")]
    InvalidRecovery { recovery: f64 },

    /// Negative spreads, margins, or fund contributions.
    #[error("{what} must be non-negative, got {value}")]
    NegativeInput { what: &'static str, value: f64 },

    /// A member with neither margin nor fund contribution cannot participate
    /// in the waterfall.
    #[error("member {id} has zero margin and zero default fund")]
    InactiveMember { id: String },

    /// Roster-level structural problems (too few members, bad periods, ...).
    #[error("invalid roster: {reason}")]
    InvalidRoster { reason: String },

    /// The defaulted members' fund contributions meet or exceed the whole
    /// fund, so survivor allocations are unbounded.
    #[error("fund exhausted: defaulted contributions {defaulted} reach the total fund {total}")]
    FundExhausted { defaulted: f64, total: f64 },

    /// The defaulted set passed to an allocation query was empty or included
    /// the reporting member.
    #[error("invalid default scenario: {reason}")]
    InvalidScenario { reason: String },

    /// Tail index at or below 1 gives the loss tail an infinite mean.
    #[error("tail mean is infinite for tail index alpha = {alpha} <= 1")]
    InfiniteMeanTail { alpha: f64 },

    /// The tail model is anchored at the stressed margin; a zero margin
    /// degenerates the scale.
    #[error("initial margin must be positive for the tail model (member {id})")]
    DegenerateMargin { id: String },

    /// `pareto_tail_prob` is only defined from the stressed margin outward.
    #[error("tail probability undefined below the stressed margin: x = {x} < {m_star}")]
    BelowTailAnchor { x: f64, m_star: f64 },

    /// Probabilities, correlations, decays, quantile levels out of range.
    #[error("{what} must lie in {range}, got {value}")]
    OutOfRange {
        what: &'static str,
        range: &'static str,
        value: f64,
    },

    /// Horizon or period lengths that make no sense.
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },

    /// Operation called with a config built for the other engine backend.
    #[error("engine mode mismatch: this operation requires {expected}")]
    ModeMismatch { expected: &'static str },

    /// Exact scenario enumeration is exponential in the roster size.
    #[error("exact enumeration refused for {members} members (limit 20)")]
    RosterTooLarge { members: usize },

    /// Too few quadrature nodes to trust the common-factor integral.
    #[error("quadrature needs at least 8 nodes, got {points}")]
    QuadratureTooCoarse { points: usize },

    /// Monte Carlo sample budget below the floor where standard errors mean
    /// anything for rare default events.
    #[error("sample count {samples} below the minimum of {min}")]
    TooFewSamples { samples: u64, min: u64 },

    /// More than the tolerated share of sampled scenarios wiped out the
    /// default fund; the finite-allocation model no longer applies.
    #[error("fund-exhaustion rate too high: {rate:.4} of samples exceeded the fund")]
    ExhaustionRateTooHigh { rate: f64 },

    /// Time series with no observations where at least one is required.
    #[error("empty series: {what}")]
    EmptySeries { what: &'static str },

    /// Series too short for the requested computation (horizons, warm-ups).
    #[error("insufficient data: {reason}")]
    InsufficientData { reason: String },

    /// Price levels must be finite, and strictly positive for log-returns.
    #[error("invalid price level {level} at index {index}")]
    NonPositiveLevel { level: f64, index: usize },

    /// Series dates must strictly increase.
    #[error("dates not strictly increasing at index {index}")]
    UnorderedDates { index: usize },

    /// The volatility needed as a denominator is zero (constant series).
    #[error("zero volatility: {what}")]
    ZeroVolatility { what: &'static str },

    /// Backward and forward vol series must cover the same dates.
    #[error("misaligned series: backward has {back} points, forward {fwd}")]
    MisalignedSeries { back: usize, fwd: usize },

    /// Too few observations beyond the fit anchor to estimate a tail index.
    #[error("tail too thin: {beyond} observations beyond the anchor, need {min}")]
    TailTooThin { beyond: usize, min: usize },

    /// Contagion below 1 would mean stress *reduces* volatility, which the
    /// breach-probability map excludes by construction.
    #[error("contagion factor must be >= 1, got {gamma}")]
    ContagionBelowOne { gamma: f64 },

    /// An estimator was handed the wrong kind of series (log-returns vs
    /// level changes, backward vs forward vols).
    #[error("wrong series kind: expected {expected}, got {got}")]
    WrongSeriesKind {
        expected: &'static str,
        got: &'static str,
    },
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
