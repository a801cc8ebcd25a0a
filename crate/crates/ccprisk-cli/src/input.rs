//! CSV ingestion. Every parse failure carries the file and line it came
//! from; validation failures from the library get the same treatment where
//! a row can be blamed.

use std::collections::HashSet;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use ccprisk::{ClearingMember, Error as ModelError, PriceSeries};

use crate::CliError;

/// One roster row as it appears on disk: spreads in basis points, recovery
/// in percent. The first row is the reporting member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterRow {
    pub member_id: String,
    pub initial_margin: f64,
    pub default_fund: f64,
    pub cds_spread_bps: f64,
    pub recovery_pct: f64,
}

impl RosterRow {
    pub fn to_member(&self) -> Result<ClearingMember, ModelError> {
        ClearingMember::new(
            self.member_id.clone(),
            self.initial_margin,
            self.default_fund,
            self.cds_spread_bps / 10_000.0,
            self.recovery_pct / 100.0,
        )
    }
}

fn input_err(path: &Path, line: Option<u64>, msg: impl std::fmt::Display) -> CliError {
    match line {
        Some(l) => CliError::Input(format!("{}:{l}: {msg}", path.display())),
        None => CliError::Input(format!("{}: {msg}", path.display())),
    }
}

/// Reads and validates a roster file: header, at least two members, unique
/// ids, numerics acceptable to the model.
pub fn read_roster(path: &Path) -> Result<Vec<RosterRow>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| input_err(path, None, e))?;
    let headers = reader
        .headers()
        .map_err(|e| input_err(path, None, e))?
        .clone();

    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line());
            input_err(path, line, e)
        })?;
        let line = rec.position().map(|p| p.line());
        let row: RosterRow = rec
            .deserialize(Some(&headers))
            .map_err(|e| input_err(path, line, e))?;
        if !seen.insert(row.member_id.clone()) {
            return Err(input_err(
                path,
                line,
                format!("duplicate member id {:?}", row.member_id),
            ));
        }
        // Surface bad numbers with the offending line attached.
        row.to_member().map_err(|e| input_err(path, line, e))?;
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(input_err(
            path,
            None,
            format!("roster needs at least 2 members, found {}", rows.len()),
        ));
    }
    Ok(rows)
}

pub fn roster_members(rows: &[RosterRow]) -> Result<Vec<ClearingMember>, CliError> {
    rows.iter()
        .map(|r| r.to_member().map_err(CliError::Domain))
        .collect()
}

/// Reads a `date,level` series file into a validated [`PriceSeries`].
pub fn read_series(path: &Path) -> Result<PriceSeries, CliError> {
    #[derive(Deserialize)]
    struct SeriesRow {
        date: NaiveDate,
        level: f64,
    }

    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| input_err(path, None, e))?;
    let headers = reader
        .headers()
        .map_err(|e| input_err(path, None, e))?
        .clone();

    let mut observations = Vec::new();
    let mut lines = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line());
            input_err(path, line, e)
        })?;
        let line = rec.position().map(|p| p.line());
        let row: SeriesRow = rec
            .deserialize(Some(&headers))
            .map_err(|e| input_err(path, line, e))?;
        observations.push((row.date, row.level));
        lines.push(line);
    }

    PriceSeries::new(observations).map_err(|e| match e {
        // Blame the exact row the library points at.
        ModelError::UnorderedDates { index } | ModelError::NonPositiveLevel { index, .. } => {
            input_err(path, lines.get(index).copied().flatten(), e)
        }
        other => input_err(path, None, other),
    })
}
