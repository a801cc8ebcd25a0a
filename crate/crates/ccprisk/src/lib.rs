//! Collateral-at-risk analytics for a clearinghouse member.
//!
//! The crate answers one question: when a member of a central counterparty
//! posts initial margin and a default-fund contribution, what is the
//! expected loss on that collateral from *other* members defaulting?
//!
//! It is organised in three layers:
//!
//! * [`model`] — the analytic core: loss waterfall, Pareto loss tail,
//!   closed-form expected tail loss, exposure aggregation and the
//!   membership charge.
//! * [`scenario`] — a one-factor Gaussian-copula engine for the
//!   multi-default correction ε, with both Monte Carlo (antithetic,
//!   reproducible across thread counts) and exact quadrature backends.
//! * [`calibration`] — estimation of the four market parameters (wrong-way
//!   factor, contagion factor, margin-breach probability, tail index) from
//!   historical price series via EWMA volatilities and a Pareto tail fit.
//!
//! [`math`] holds the small numerical toolkit shared by all three
//! (normal distribution helpers, empirical quantiles, Gauss–Hermite
//! nodes); [`error`] the common error type.

pub mod calibration;
pub mod error;
pub mod math;
pub mod model;
pub mod scenario;

pub use calibration::{
    absolute_changes, breach_probability, calibrate_market, contagion_factor,
    ewma_backward, ewma_forward, log_returns, pareto_fit, pareto_fit_opts,
    stress_quantile, wrong_way_factor, CalibrationConfig, CalibrationDiagnostics,
    CalibrationOutcome, FitSpace, ParetoFit, PriceSeries, ReturnKind, ReturnSeries,
    TailPoint, TailSide, VolDirection, VolMapping, VolSeries,
};
pub use error::{Error, Result};
pub use model::{
    allocation_fraction, conditional_expected_tail_loss, hazard_from_spread,
    homogeneous_roster, member_exposure, pareto_tail_prob, simplified_charge,
    stressed_collateral, total_charge, uncollateralised_loss, CcpStructure,
    ClearingMember, DiscountCurve, MarketCalibration, MemberRiskRow, RiskReport,
    RiskTotals, SimplifiedCharge,
};
pub use scenario::{
    epsilon_exact, epsilon_mc, joint_default_sample, loss_amplifier, DefaultScenario,
    EpsilonResult, SamplingMode, ScenarioEngineConfig,
};
