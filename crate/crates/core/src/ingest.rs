//! From raw `(date, days_to_expiry, rate)` quotes to a panel of curves.
//!
//! Each date's quotes are interpolated by a natural cubic spline in rate
//! space and sampled on a fixed maturity grid. Dates whose quotes do not
//! cover the whole grid are dropped and reported, never extrapolated.

use std::collections::BTreeMap;
use std::io::Read;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};

use crate::error::{FarError, Result};
use crate::grid::{Curve, Grid};
use crate::panel::{parse_date, CurvePanel};
use crate::spline::NaturalSpline;

pub const QUOTE_HEADER: [&str; 3] = ["date", "days_to_expiry", "rate"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawQuote {
    pub date: NaiveDate,
    pub days_to_expiry: u32,
    /// Decimal per annum.
    pub rate: f64,
}

/// All quotes observed on one date, sorted by maturity.
#[derive(Debug, Clone, PartialEq)]
pub struct QuoteDay {
    pub date: NaiveDate,
    pub quotes: Vec<RawQuote>,
}

/// A date that [`build_panel`] could not turn into a curve.
#[derive(Debug, Clone, PartialEq)]
pub struct DroppedDate {
    pub date: NaiveDate,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct PanelBuild {
    pub panel: CurvePanel,
    pub dropped: Vec<DroppedDate>,
}

/// Parse `date,days_to_expiry,rate` CSV into per-date groups.
pub fn parse_quotes<R: Read>(input: R) -> Result<Vec<QuoteDay>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(input);
    let mut records = reader.records();

    match records.next() {
        None => return Err(FarError::Parse { line: 1, msg: "missing header".into() }),
        Some(h) => {
            let h = h?;
            if h.len() != 3 || h.iter().zip(QUOTE_HEADER).any(|(a, b)| a != b) {
                return Err(FarError::Parse {
                    line: 1,
                    msg: format!("header must be `{}`", QUOTE_HEADER.join(",")),
                });
            }
        }
    }

    let mut by_date: BTreeMap<NaiveDate, BTreeMap<u32, f64>> = BTreeMap::new();
    for rec in records {
        let rec = rec.map_err(|e| FarError::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 3 {
            return Err(FarError::Parse { line, msg: format!("expected 3 fields, got {}", rec.len()) });
        }
        let date = parse_date(&rec[0], line)?;
        let days: u32 = rec[1]
            .parse()
            .map_err(|_| FarError::Parse { line, msg: format!("bad days_to_expiry `{}`", &rec[1]) })?;
        if days == 0 {
            return Err(FarError::Parse { line, msg: "days_to_expiry must be positive".into() });
        }
        let rate: f64 =
            rec[2].parse().map_err(|_| FarError::Parse { line, msg: format!("bad rate `{}`", &rec[2]) })?;
        if !rate.is_finite() {
            return Err(FarError::Parse { line, msg: "rate must be finite".into() });
        }
        if by_date.entry(date).or_default().insert(days, rate).is_some() {
            return Err(FarError::DuplicateQuote { date, days });
        }
    }

    Ok(by_date
        .into_iter()
        .map(|(date, qs)| QuoteDay {
            date,
            quotes: qs
                .into_iter()
                .map(|(days_to_expiry, rate)| RawQuote { date, days_to_expiry, rate })
                .collect(),
        })
        .collect())
}

/// Spline one date's quotes onto `grid`.
pub fn build_curve(quotes: &[RawQuote], grid: &Grid) -> Result<Curve> {
    if quotes.len() < 4 {
        return Err(FarError::InsufficientQuotes(quotes.len()));
    }
    let knots: Vec<f64> = quotes.iter().map(|q| q.days_to_expiry as f64).collect();
    let rates: Vec<f64> = quotes.iter().map(|q| q.rate).collect();
    let spline = NaturalSpline::fit(&knots, &rates)?;
    let values = grid.points().map(|t| spline.eval(t)).collect::<Result<Vec<_>>>()?;
    Curve::new(*grid, DVector::from_vec(values))
}

/// Build the uncentered panel on the grid `{min_days, min_days + spacing, ...} <= max_days`.
pub fn build_panel(days: &[QuoteDay], min_days: f64, max_days: f64, spacing: f64) -> Result<PanelBuild> {
    let grid = Grid::window(min_days, max_days, spacing)?;
    let mut dates = Vec::new();
    let mut curves = Vec::new();
    let mut dropped = Vec::new();
    for day in days {
        match build_curve(&day.quotes, &grid) {
            Ok(c) => {
                dates.push(day.date);
                curves.push(c);
            }
            Err(e @ (FarError::InsufficientQuotes(_) | FarError::Extrapolation { .. })) => {
                dropped.push(DroppedDate { date: day.date, reason: e.to_string() })
            }
            Err(e) => return Err(e),
        }
    }
    if curves.is_empty() {
        return Err(FarError::NoValidDates(format!(
            "none of {} dates covers maturities {}..{}",
            days.len(),
            grid.origin(),
            grid.terminal()
        )));
    }
    let mut rows = DMatrix::zeros(curves.len(), grid.len());
    for (i, c) in curves.iter().enumerate() {
        rows.set_row(i, &c.values().transpose());
    }
    Ok(PanelBuild { panel: CurvePanel::new(grid, dates, rows)?, dropped })
}
