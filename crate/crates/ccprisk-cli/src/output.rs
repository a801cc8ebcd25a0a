//! Report rendering: human tables on stdout, machine-readable JSON on
//! request. The JSON echoes every input (including the parsed roster and
//! any pinned parameters) and is byte-deterministic for identical inputs —
//! no timestamps, no map iteration order, no environment leakage.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use ccprisk::scenario::EpsilonResult;
use ccprisk::{CalibrationOutcome, MarketCalibration, RiskReport, SimplifiedCharge};

use crate::input::RosterRow;
use crate::CliError;

/// Serializes `doc` as pretty JSON to `path`, or to stdout when the path
/// is `-`.
pub fn write_json<T: Serialize>(path: &Path, doc: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(doc)
        .map_err(|e| CliError::Input(format!("serializing report: {e}")))?;
    text.push('\n');
    if path == Path::new("-") {
        print!("{text}");
        return Ok(());
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(|e| CliError::Input(format!("writing {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// calibrate

#[derive(Serialize)]
pub struct CalibrateDoc {
    pub command: &'static str,
    pub inputs: CalibrateInputs,
    pub result: CalibrationOutcome,
}

#[derive(Serialize)]
pub struct CalibrateInputs {
    pub config: ccprisk::CalibrationConfig,
    pub n_observations: usize,
    pub first_date: String,
    pub last_date: String,
}

pub fn print_calibration(outcome: &CalibrationOutcome) {
    let m = &outcome.market;
    let d = &outcome.diagnostics;
    println!("Market calibration");
    println!("  wrong-way factor  w      {:>10.4}{}", m.wrong_way_factor,
        if d.wrong_way_clamped { "  (raw below 1, clamped)" } else { "" });
    println!("  contagion factor  gamma  {:>10.4}{}", m.contagion_factor,
        if d.contagion_clamped { "  (raw below 1, clamped)" } else { "" });
    println!("  breach prob       p-hat  {:>10.4}", m.breach_probability);
    println!("  tail index        alpha  {:>10.4}", m.pareto_index);
    println!();
    println!("Diagnostics");
    println!("  observations             {:>10}", d.n_observations);
    println!("  returns                  {:>10}", d.n_returns);
    println!("  current vol              {:>10.6}", d.current_vol);
    println!("  stress vol (quantile)    {:>10.6}", d.stress_vol);
    println!("  raw wrong-way            {:>10.4}", d.raw_wrong_way);
    println!("  raw contagion            {:>10.4}", d.raw_contagion);
    println!("  tail obs beyond anchor   {:>10}", d.pareto.tail_count);
    println!("  tail anchor              {:>10.6}", d.pareto.anchor);
    println!("  fit objective            {:>10.3e}", d.pareto.goodness_of_fit);
    println!("  gaussian-equivalent alpha{:>10.1}", d.pareto.gaussian_reference_alpha);
    let band = |ok: bool| if ok { "inside" } else { "OUTSIDE" };
    println!(
        "  w vs typical band [1.2, 2.6]:  {}",
        band(d.wrong_way_in_typical_band)
    );
    println!(
        "  gamma vs typical band [1.8, 2.8]:  {}",
        band(d.contagion_in_typical_band)
    );
}

// ---------------------------------------------------------------------------
// epsilon

#[derive(Serialize)]
pub struct EpsilonDoc {
    pub command: &'static str,
    pub inputs: EpsilonInputs,
    pub result: EpsilonOutput,
}

#[derive(Serialize)]
pub struct EpsilonInputs {
    pub roster: Vec<RosterRow>,
    pub correlation: f64,
    pub recap_days: u32,
    pub liquidation_days: u32,
    pub margin_confidence: f64,
    pub mode: String,
    pub mc_samples: u64,
    pub rng_seed: u64,
    pub quadrature_points: usize,
}

#[derive(Serialize)]
pub struct EpsilonOutput {
    pub members: Vec<EpsilonRow>,
    pub exhausted_fraction: f64,
    pub samples: u64,
}

#[derive(Serialize)]
pub struct EpsilonRow {
    pub member_id: String,
    pub window_default_prob: f64,
    pub epsilon: f64,
    pub std_error: f64,
    pub observed_default_freq: f64,
}

pub fn epsilon_output(ids: &[String], res: &EpsilonResult) -> EpsilonOutput {
    let members = ids
        .iter()
        .zip(&res.epsilon)
        .zip(&res.std_error)
        .zip(&res.marginal_default_prob)
        .zip(&res.observed_default_freq)
        .map(|((((id, &e), &se), &p), &f)| EpsilonRow {
            member_id: id.clone(),
            window_default_prob: p,
            epsilon: e,
            std_error: se,
            observed_default_freq: f,
        })
        .collect();
    EpsilonOutput {
        members,
        exhausted_fraction: res.exhausted_fraction,
        samples: res.samples,
    }
}

pub fn print_epsilon(out: &EpsilonOutput) {
    println!(
        "{:<10} {:>14} {:>12} {:>12} {:>14}",
        "member", "P[default]", "epsilon", "std error", "observed freq"
    );
    for r in &out.members {
        println!(
            "{:<10} {:>14.6e} {:>12.6} {:>12.2e} {:>14.6e}",
            r.member_id, r.window_default_prob, r.epsilon, r.std_error, r.observed_default_freq
        );
    }
    println!();
    if out.samples > 0 {
        println!("samples             {:>14}", out.samples);
    }
    println!("exhausted fraction  {:>14.3e}", out.exhausted_fraction);
}

// ---------------------------------------------------------------------------
// epsilon --table1

#[derive(Serialize)]
pub struct GridDoc {
    pub command: &'static str,
    pub preset: &'static str,
    pub inputs: GridInputs,
    pub result: GridOutput,
}

#[derive(Serialize)]
pub struct GridInputs {
    pub counterparties: usize,
    pub quadrature_points: usize,
    pub recovery_pct: f64,
    pub margin_confidence: f64,
}

#[derive(Serialize)]
pub struct GridOutput {
    pub correlations_pct: Vec<f64>,
    pub columns: Vec<GridColumn>,
}

#[derive(Serialize)]
pub struct GridColumn {
    pub window_days: u32,
    pub spread_bps: f64,
    pub epsilon_pct: Vec<f64>,
}

pub fn print_grid(grid: &GridOutput) {
    print!("{:>8}", "rho");
    for c in &grid.columns {
        print!("{:>18}", format!("{}d / {}bps", c.window_days, c.spread_bps));
    }
    println!();
    for (i, rho) in grid.correlations_pct.iter().enumerate() {
        print!("{:>7}%", rho);
        for c in &grid.columns {
            print!("{:>17.2}%", c.epsilon_pct[i]);
        }
        println!();
    }
}

// ---------------------------------------------------------------------------
// charge

#[derive(Serialize)]
pub struct ChargeDoc {
    pub command: &'static str,
    pub inputs: ChargeInputs,
    pub result: ChargeOutput,
}

#[derive(Serialize)]
pub struct ChargeInputs {
    pub roster: Vec<RosterRow>,
    pub calibration: MarketCalibration,
    pub pins: PinEcho,
    pub epsilon_source: EpsilonSource,
    pub horizon_years: f64,
    pub discount_rate: f64,
    pub recap_days: u32,
    pub liquidation_days: u32,
    pub margin_confidence: f64,
}

/// Which of the four parameters were pinned on the command line rather
/// than taken from a calibration file.
#[derive(Serialize)]
pub struct PinEcho {
    pub calibration_file: Option<PathBuf>,
    pub wrong_way_factor: Option<f64>,
    pub contagion_factor: Option<f64>,
    pub breach_probability: Option<f64>,
    pub pareto_index: Option<f64>,
    pub epsilon: Option<f64>,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EpsilonSource {
    /// Single-default approximation: ε = 0 for everyone.
    Zero,
    /// A uniform pinned value.
    Pinned { epsilon: f64 },
    /// Computed by the scenario engine as part of this run.
    Computed {
        mode: String,
        correlation: f64,
        mc_samples: u64,
        rng_seed: u64,
        quadrature_points: usize,
    },
}

#[derive(Serialize)]
pub struct ChargeOutput {
    pub report: RiskReport,
    pub simplified: SimplifiedCharge,
    pub average_margin: f64,
    pub average_fund: f64,
}

pub fn print_charge(out: &ChargeOutput) {
    println!(
        "{:<10} {:>12} {:>10} {:>14} {:>14}",
        "member", "tail loss", "epsilon", "exposure", "contribution"
    );
    for r in &out.report.rows {
        println!(
            "{:<10} {:>12.6} {:>10.6} {:>14.6e} {:>14.6e}",
            r.id, r.tail_loss, r.epsilon, r.exposure, r.charge_contribution
        );
    }
    let t = &out.report.totals;
    println!();
    println!("expected collateral loss   {:>14.6e}", t.charge);
    println!("loss given default (total) {:>13.4}%", 100.0 * t.lgd_total);
    println!("charge fraction            {:>12.2} bps", 1e4 * t.charge_fraction);
    println!("average hazard             {:>14.6}", t.average_hazard);
    println!();
    println!("Homogeneous shortcut (averages: margin {:.4}, fund {:.4})",
        out.average_margin, out.average_fund);
    println!("  LGD_tot                  {:>13.4}%", 100.0 * out.simplified.lgd_total);
    println!("  charge fraction          {:>12.2} bps", 1e4 * out.simplified.charge_fraction);
    println!("  charge                   {:>14.6e}", out.simplified.charge);
}
