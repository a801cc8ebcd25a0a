//! `ccprisk` — collateral risk analytics for clearinghouse members.
//!
//! Three subcommands: `calibrate` estimates the market parameters from a
//! historical price series, `epsilon` computes multi-default correction
//! terms for a member roster, and `charge` produces the expected-loss
//! report. Every command can emit a machine-readable JSON report that
//! echoes its inputs; identical inputs and seed give byte-identical output.
//!
//! Exit codes: 0 success, 2 input/parse error, 3 domain error,
//! 4 scenario-exhaustion failure.

mod input;
mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ccprisk::scenario::{epsilon_exact, epsilon_mc, EpsilonResult, ScenarioEngineConfig};
use ccprisk::{
    calibrate_market, homogeneous_roster, simplified_charge, total_charge, CalibrationConfig,
    CcpStructure, DiscountCurve, Error as ModelError, FitSpace, MarketCalibration, TailSide,
    VolMapping,
};

use input::{read_roster, read_series, roster_members};
use output::*;

const DEFAULT_SEED: u64 = 42;

#[derive(Debug)]
pub enum CliError {
    /// Unusable input: files, flags, formats. Exit code 2.
    Input(String),
    /// The model itself rejected the run. Exit code 3 (4 for exhaustion).
    Domain(ModelError),
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Domain(e)
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Domain(ModelError::ExhaustionRateTooHigh { .. }) => 4,
            CliError::Domain(_) => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Input(m) => m.clone(),
            CliError::Domain(e) => e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "ccprisk",
    version,
    about = "Expected loss on collateral posted to a central counterparty"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate wrong-way, contagion, breach probability and tail index
    /// from a historical price series
    Calibrate(CalibrateArgs),
    /// Multi-default correction terms for a member roster
    Epsilon(EpsilonArgs),
    /// Expected collateral loss and membership charge
    Charge(ChargeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MappingArg {
    Linear,
    Exp,
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Both,
    Up,
    Down,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitSpaceArg {
    Prob,
    Log,
}

#[derive(Args)]
struct CalibrateArgs {
    /// CSV price series: date,level
    #[arg(long)]
    series: PathBuf,
    /// Return horizon in days
    #[arg(long, default_value_t = 5)]
    horizon_days: u32,
    /// Backward EWMA decay
    #[arg(long, default_value_t = 0.99)]
    decay: f64,
    /// Forward EWMA decay
    #[arg(long, default_value_t = 0.97)]
    decay_fwd: f64,
    /// Quantile for the stress vol and the contagion ratio
    #[arg(long, default_value_t = 0.99)]
    quantile: f64,
    /// Margin model mapping vol to margin
    #[arg(long, value_enum, default_value_t = MappingArg::Linear)]
    mapping: MappingArg,
    /// Use disjoint return windows instead of overlapping ones
    #[arg(long)]
    no_overlap: bool,
    /// Which side of the change distribution feeds the tail fit
    #[arg(long, value_enum, default_value_t = SideArg::Both)]
    side: SideArg,
    /// Least-squares objective space for the tail fit
    #[arg(long, value_enum, default_value_t = FitSpaceArg::Prob)]
    fit_space: FitSpaceArg,
    /// Exceedance probability at the tail anchor
    #[arg(long, default_value_t = 0.01)]
    anchor_prob: f64,
    /// Margin confidence level p_M
    #[arg(long, default_value_t = 0.01)]
    margin_confidence: f64,
    /// Write the machine-readable report here ("-" for stdout)
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct EpsilonArgs {
    /// CSV roster: member_id,initial_margin,default_fund,cds_spread_bps,recovery_pct
    #[arg(long, required_unless_present = "table1")]
    roster: Option<PathBuf>,
    /// Copula correlation in [0, 1)
    #[arg(long, required_unless_present = "table1")]
    rho: Option<f64>,
    /// Recapitalisation window in days
    #[arg(long, default_value_t = 30)]
    recap_days: u32,
    /// Liquidation window in days
    #[arg(long, default_value_t = 5)]
    liq_days: u32,
    /// Margin confidence level p_M
    #[arg(long, default_value_t = 0.01)]
    margin_confidence: f64,
    /// Monte Carlo sample count
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    /// RNG seed (default: CCPRISK_SEED env var, then 42)
    #[arg(long)]
    seed: Option<u64>,
    /// Use exact scenario enumeration instead of Monte Carlo
    #[arg(long)]
    exact: bool,
    /// Gauss–Hermite node count for the exact backend
    /// [default: 64, or 256 for the preset grid]
    #[arg(long)]
    quad_points: Option<usize>,
    /// Preset: correction-term grid for a homogeneous clearinghouse across
    /// correlations, spreads and windows
    #[arg(long)]
    table1: bool,
    /// Counterparty count for the preset grid
    #[arg(long, default_value_t = 14)]
    table1_others: usize,
    /// Write the machine-readable report here ("-" for stdout)
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ChargeArgs {
    /// CSV roster: member_id,initial_margin,default_fund,cds_spread_bps,recovery_pct
    #[arg(long)]
    roster: PathBuf,
    /// Calibration JSON (either a calibrate report or a bare parameter set)
    #[arg(long)]
    cal: Option<PathBuf>,
    /// Pin the wrong-way factor
    #[arg(long)]
    pin_w: Option<f64>,
    /// Pin the contagion factor (not used by the charge itself)
    #[arg(long)]
    pin_gamma: Option<f64>,
    /// Pin the margin-breach probability
    #[arg(long)]
    pin_phat: Option<f64>,
    /// Pin the tail index
    #[arg(long)]
    pin_alpha: Option<f64>,
    /// Pin a uniform correction term instead of computing it
    #[arg(long)]
    pin_epsilon: Option<f64>,
    /// Compute correction terms at this copula correlation
    #[arg(long)]
    rho: Option<f64>,
    /// Use exact scenario enumeration for the correction terms
    #[arg(long)]
    exact: bool,
    /// Monte Carlo sample count for the correction terms
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    /// RNG seed (default: CCPRISK_SEED env var, then 42)
    #[arg(long)]
    seed: Option<u64>,
    /// Gauss–Hermite node count for the exact backend
    #[arg(long, default_value_t = 64)]
    quad_points: usize,
    /// Recapitalisation window in days
    #[arg(long, default_value_t = 30)]
    recap_days: u32,
    /// Liquidation window in days
    #[arg(long, default_value_t = 5)]
    liq_days: u32,
    /// Margin confidence level p_M
    #[arg(long, default_value_t = 0.01)]
    margin_confidence: f64,
    /// Charge horizon in years
    #[arg(long, default_value_t = 1.0)]
    horizon_years: f64,
    /// Flat continuously compounded discount rate
    #[arg(long, default_value_t = 0.0)]
    rate: f64,
    /// Write the machine-readable report here ("-" for stdout)
    #[arg(long)]
    json: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Epsilon(args) => cmd_epsilon(args),
        Command::Charge(args) => cmd_charge(args),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}

/// Seed precedence: flag, then CCPRISK_SEED, then a fixed default.
fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("CCPRISK_SEED") {
        Ok(text) => text
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("CCPRISK_SEED is not a u64: {text:?}"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<(), CliError> {
    let series = read_series(&args.series)?;

    let cfg = CalibrationConfig {
        return_horizon_days: args.horizon_days,
        overlapping: !args.no_overlap,
        backward_decay: args.decay,
        forward_decay: args.decay_fwd,
        quantile: args.quantile,
        margin_confidence: args.margin_confidence,
        mapping: match args.mapping {
            MappingArg::Linear => VolMapping::Linear,
            MappingArg::Exp => VolMapping::Exponential,
        },
        anchor_prob: args.anchor_prob,
        tail_side: match args.side {
            SideArg::Both => TailSide::Both,
            SideArg::Up => TailSide::Up,
            SideArg::Down => TailSide::Down,
        },
        fit_space: match args.fit_space {
            FitSpaceArg::Prob => FitSpace::Probability,
            FitSpaceArg::Log => FitSpace::LogProbability,
        },
        ..CalibrationConfig::default()
    };

    if series.len() < 500 {
        eprintln!(
            "warning: {} observations is under roughly two years of daily data; \
             estimates will be noisy",
            series.len()
        );
    }

    let outcome = calibrate_market(&series, &cfg)?;
    print_calibration(&outcome);

    if let Some(path) = &args.json {
        let obs = series.observations();
        let doc = CalibrateDoc {
            command: "calibrate",
            inputs: CalibrateInputs {
                config: cfg,
                n_observations: series.len(),
                first_date: obs[0].0.to_string(),
                last_date: obs[obs.len() - 1].0.to_string(),
            },
            result: outcome,
        };
        write_json(path, &doc)?;
    }
    Ok(())
}

fn run_engine(
    ccp: &CcpStructure,
    rho: f64,
    exact: bool,
    samples: u64,
    seed: u64,
    quad_points: usize,
) -> Result<EpsilonResult, CliError> {
    let mut cfg = if exact {
        ScenarioEngineConfig::exact(ccp, rho)
    } else {
        ScenarioEngineConfig::monte_carlo(ccp, rho, samples, seed)
    };
    cfg.quadrature_points = quad_points;
    let res = if exact {
        epsilon_exact(ccp, &cfg)?
    } else {
        epsilon_mc(ccp, &cfg)?
    };
    Ok(res)
}

fn cmd_epsilon(args: EpsilonArgs) -> Result<(), CliError> {
    if args.table1 {
        return cmd_epsilon_grid(&args);
    }
    // required_unless_present guarantees these.
    let roster_path = args.roster.as_ref().expect("clap enforces --roster");
    let rho = args.rho.expect("clap enforces --rho");
    let seed = resolve_seed(args.seed)?;

    let rows = read_roster(roster_path)?;
    let members = roster_members(&rows)?;
    let ccp = CcpStructure::new(
        members,
        0.0,
        args.liq_days,
        args.recap_days,
        args.margin_confidence,
    )?;
    let quad_points = args.quad_points.unwrap_or(64);
    let res = run_engine(&ccp, rho, args.exact, args.samples, seed, quad_points)?;

    let ids: Vec<String> = ccp.others().iter().map(|m| m.id.clone()).collect();
    let out = epsilon_output(&ids, &res);
    print_epsilon(&out);

    if let Some(path) = &args.json {
        let doc = EpsilonDoc {
            command: "epsilon",
            inputs: EpsilonInputs {
                roster: rows,
                correlation: rho,
                recap_days: args.recap_days,
                liquidation_days: args.liq_days,
                margin_confidence: args.margin_confidence,
                mode: if args.exact { "exact" } else { "monte_carlo" }.to_string(),
                mc_samples: if args.exact { 0 } else { args.samples },
                rng_seed: if args.exact { 0 } else { seed },
                quadrature_points: quad_points,
            },
            result: out,
        };
        write_json(path, &doc)?;
    }
    Ok(())
}

/// The reference grid: a homogeneous clearinghouse (equal margins and fund
/// contributions, 40% recovery), ε for one counterparty as a percentage,
/// across ρ ∈ {0, 20, 40, 60, 70, 80, 90}% and three window/spread
/// combinations. Exact enumeration throughout.
fn cmd_epsilon_grid(args: &EpsilonArgs) -> Result<(), CliError> {
    const RHOS: [f64; 7] = [0.0, 0.2, 0.4, 0.6, 0.7, 0.8, 0.9];
    const COLUMNS: [(u32, f64); 3] = [(30, 200.0), (10, 200.0), (30, 100.0)];

    // High correlations concentrate the integrand; a reference grid should
    // ship converged, so it defaults to four times the usual node count.
    let quad_points = args.quad_points.unwrap_or(256);
    let mut columns = Vec::new();
    for (window_days, spread_bps) in COLUMNS {
        let ccp = homogeneous_roster(
            args.table1_others + 1,
            100.0,
            1.0,
            spread_bps / 10_000.0,
            0.40,
            args.liq_days.min(window_days),
            window_days,
        )?;
        let mut eps_pct = Vec::with_capacity(RHOS.len());
        for rho in RHOS {
            let res = run_engine(&ccp, rho, true, 0, 0, quad_points)?;
            eps_pct.push(100.0 * res.epsilon[0]);
        }
        columns.push(GridColumn {
            window_days,
            spread_bps,
            epsilon_pct: eps_pct,
        });
    }

    let grid = GridOutput {
        correlations_pct: RHOS.iter().map(|r| 100.0 * r).collect(),
        columns,
    };
    print_grid(&grid);

    if let Some(path) = &args.json {
        let doc = GridDoc {
            command: "epsilon",
            preset: "table1",
            inputs: GridInputs {
                counterparties: args.table1_others,
                quadrature_points: quad_points,
                recovery_pct: 40.0,
                margin_confidence: args.margin_confidence,
            },
            result: grid,
        };
        write_json(path, &doc)?;
    }
    Ok(())
}

/// Loads a calibration file: either a bare parameter object or a full
/// calibrate report (whose parameters sit at `result.market`).
fn load_calibration(path: &PathBuf) -> Result<MarketCalibration, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let market = value
        .pointer("/result/market")
        .or_else(|| value.pointer("/market"))
        .unwrap_or(&value);
    serde_json::from_value(market.clone())
        .map_err(|e| CliError::Input(format!("{}: not a calibration: {e}", path.display())))
}

fn cmd_charge(args: ChargeArgs) -> Result<(), CliError> {
    let rows = read_roster(&args.roster)?;
    let members = roster_members(&rows)?;
    let ccp = CcpStructure::new(
        members,
        0.0,
        args.liq_days,
        args.recap_days,
        args.margin_confidence,
    )?;

    // Resolve the market parameters: file first, pins override, the
    // contagion factor defaults to 1 because the charge never uses it.
    let from_file = args.cal.as_ref().map(load_calibration).transpose()?;
    let pick = |pin: Option<f64>, file: Option<f64>, name: &str| {
        pin.or(file).ok_or_else(|| {
            CliError::Input(format!(
                "missing {name}: provide --cal FILE or the corresponding pin flag"
            ))
        })
    };
    let cal = MarketCalibration::new(
        pick(args.pin_w, from_file.map(|c| c.wrong_way_factor), "wrong-way factor (--pin-w)")?,
        args.pin_gamma
            .or(from_file.map(|c| c.contagion_factor))
            .unwrap_or(1.0),
        pick(
            args.pin_phat,
            from_file.map(|c| c.breach_probability),
            "breach probability (--pin-phat)",
        )?,
        pick(args.pin_alpha, from_file.map(|c| c.pareto_index), "tail index (--pin-alpha)")?,
    )?;

    let n_others = ccp.others().len();
    let seed = resolve_seed(args.seed)?;
    let (epsilons, eps_source) = match (args.pin_epsilon, args.rho) {
        (Some(e), _) => (vec![e; n_others], EpsilonSource::Pinned { epsilon: e }),
        (None, Some(rho)) => {
            let res = run_engine(&ccp, rho, args.exact, args.samples, seed, args.quad_points)?;
            let source = EpsilonSource::Computed {
                mode: if args.exact { "exact" } else { "monte_carlo" }.to_string(),
                correlation: rho,
                mc_samples: if args.exact { 0 } else { args.samples },
                rng_seed: if args.exact { 0 } else { seed },
                quadrature_points: args.quad_points,
            };
            (res.epsilon, source)
        }
        (None, None) => (vec![0.0; n_others], EpsilonSource::Zero),
    };

    let curve = DiscountCurve::new(args.rate)?;
    let report = total_charge(&ccp, &cal, &epsilons, &curve, args.horizon_years)?;

    // The homogeneous shortcut, fed with roster averages.
    let all = || ccp.others().iter();
    let avg_margin = all().map(|m| m.initial_margin).sum::<f64>() / n_others as f64;
    let avg_fund = all().map(|m| m.default_fund).sum::<f64>() / n_others as f64;
    let lambda_bar = all().map(|m| m.hazard).sum::<f64>() / n_others as f64;
    let simplified = simplified_charge(avg_margin, avg_fund, &cal, lambda_bar, args.horizon_years)?;

    let out = ChargeOutput {
        report,
        simplified,
        average_margin: avg_margin,
        average_fund: avg_fund,
    };
    print_charge(&out);

    if let Some(path) = &args.json {
        let doc = ChargeDoc {
            command: "charge",
            inputs: ChargeInputs {
                roster: rows,
                calibration: cal,
                pins: PinEcho {
                    calibration_file: args.cal.clone(),
                    wrong_way_factor: args.pin_w,
                    contagion_factor: args.pin_gamma,
                    breach_probability: args.pin_phat,
                    pareto_index: args.pin_alpha,
                    epsilon: args.pin_epsilon,
                },
                epsilon_source: eps_source,
                horizon_years: args.horizon_years,
                discount_rate: args.rate,
                recap_days: args.recap_days,
                liquidation_days: args.liq_days,
                margin_confidence: args.margin_confidence,
            },
            result: out,
        };
        write_json(path, &doc)?;
    }
    Ok(())
}
