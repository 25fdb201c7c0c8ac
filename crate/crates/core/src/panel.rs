//! Dated panels of curves on a shared grid, and their CSV form.
//!
//! The CSV layout is `date,<maturity_1>,...,<maturity_m>` with one row per
//! date. Values are written with Rust's shortest round-trip formatting, so a
//! write/read cycle reproduces every `f64` bit for bit.

use std::io::{Read, Write};

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};

use crate::error::{FarError, Result};
use crate::grid::{Curve, Grid};

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePanel {
    grid: Grid,
    dates: Vec<NaiveDate>,
    /// `n x m`, one curve per row.
    rows: DMatrix<f64>,
    mean: Option<Curve>,
    /// Uncentered rows, kept so that uncentering is exact.
    raw: Option<DMatrix<f64>>,
}

impl CurvePanel {
    pub fn new(grid: Grid, dates: Vec<NaiveDate>, rows: DMatrix<f64>) -> Result<Self> {
        if rows.nrows() != dates.len() {
            return Err(FarError::InvalidParameter(format!(
                "{} dates for {} rows",
                dates.len(),
                rows.nrows()
            )));
        }
        if rows.ncols() != grid.len() {
            return Err(FarError::InvalidParameter(format!(
                "{} columns for a {}-point grid",
                rows.ncols(),
                grid.len()
            )));
        }
        if let Some(i) = dates.windows(2).position(|w| w[1] <= w[0]) {
            return Err(FarError::InvalidParameter(format!(
                "dates not strictly increasing at {}",
                dates[i + 1]
            )));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(FarError::InvalidParameter("panel contains non-finite values".into()));
        }
        Ok(CurvePanel { grid, dates, rows, mean: None, raw: None })
    }

    /// Panel from curves that all live on `grid`.
    pub fn from_curves(grid: Grid, dates: Vec<NaiveDate>, curves: &[Curve]) -> Result<Self> {
        let mut rows = DMatrix::zeros(curves.len(), grid.len());
        for (i, c) in curves.iter().enumerate() {
            grid.ensure_compatible(c.grid())?;
            rows.set_row(i, &c.values().transpose());
        }
        CurvePanel::new(grid, dates, rows)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn is_centered(&self) -> bool {
        self.mean.is_some()
    }

    /// The subtracted mean curve, present once the panel is centered.
    pub fn mean_curve(&self) -> Option<&Curve> {
        self.mean.as_ref()
    }

    pub fn curve(&self, i: usize) -> Curve {
        Curve::from_parts_unchecked(self.grid, self.rows.row(i).transpose())
    }

    /// Per-maturity sample mean of the rows.
    pub fn column_means(&self) -> Result<Curve> {
        if self.is_empty() {
            return Err(FarError::Empty("panel has no rows".into()));
        }
        let n = self.len() as f64;
        let means = DVector::from_iterator(self.grid.len(), self.rows.column_iter().map(|c| c.sum() / n));
        Ok(Curve::from_parts_unchecked(self.grid, means))
    }

    /// Subtract the per-maturity mean and remember it.
    pub fn center(&self) -> Result<CurvePanel> {
        if self.is_centered() {
            return Err(FarError::AlreadyCentered);
        }
        let mean = self.column_means()?;
        let mut rows = self.rows.clone();
        for mut r in rows.row_iter_mut() {
            r -= mean.values().transpose();
        }
        Ok(CurvePanel {
            grid: self.grid,
            dates: self.dates.clone(),
            rows,
            mean: Some(mean),
            raw: Some(self.rows.clone()),
        })
    }

    /// Undo [`CurvePanel::center`], reproducing the original rows bit for bit.
    pub fn uncenter(&self) -> Result<CurvePanel> {
        let mean = self.mean.as_ref().ok_or(FarError::NotCentered)?;
        let rows = match &self.raw {
            Some(raw) => raw.clone(),
            None => {
                let mut rows = self.rows.clone();
                for mut r in rows.row_iter_mut() {
                    r += mean.values().transpose();
                }
                rows
            }
        };
        Ok(CurvePanel { grid: self.grid, dates: self.dates.clone(), rows, mean: None, raw: None })
    }

    /// Lag-`lag` changes `f_t - f_{t-lag}`, dated at `t`. Input to the
    /// differenced autoregression `f_{t+l} - f_t = rho[f_t - f_{t-l}] + e`.
    pub fn difference(&self, lag: usize) -> Result<CurvePanel> {
        if lag == 0 {
            return Err(FarError::InvalidParameter("difference lag must be at least 1".into()));
        }
        if self.is_centered() {
            return Err(FarError::AlreadyCentered);
        }
        if self.len() <= lag {
            return Err(FarError::TooFewRows { needed: lag, got: self.len() });
        }
        let n = self.len() - lag;
        let rows = self.rows.rows(lag, n) - self.rows.rows(0, n);
        CurvePanel::new(self.grid, self.dates[lag..].to_vec(), rows)
    }

    /// Rows with `from <= date <= to`.
    pub fn filter_dates(&self, from: Option<NaiveDate>, to: Option<NaiveDate>) -> Result<CurvePanel> {
        let keep: Vec<usize> = self
            .dates
            .iter()
            .enumerate()
            .filter(|(_, d)| from.is_none_or(|f| **d >= f) && to.is_none_or(|t| **d <= t))
            .map(|(i, _)| i)
            .collect();
        if keep.is_empty() {
            return Err(FarError::NoValidDates("date-range filter excluded every row".into()));
        }
        let rows = self.rows.select_rows(keep.iter());
        let dates = keep.iter().map(|&i| self.dates[i]).collect();
        let mut out = CurvePanel::new(self.grid, dates, rows)?;
        out.mean = self.mean.clone();
        out.raw = self.raw.as_ref().map(|r| r.select_rows(keep.iter()));
        Ok(out)
    }

    /// Leading `len` rows, uncentered as stored.
    pub fn head(&self, len: usize) -> Result<CurvePanel> {
        if len == 0 || len > self.len() {
            return Err(FarError::InvalidParameter(format!("head({len}) of a {}-row panel", self.len())));
        }
        Ok(CurvePanel {
            grid: self.grid,
            dates: self.dates[..len].to_vec(),
            rows: self.rows.rows(0, len).into_owned(),
            mean: None,
            raw: None,
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["date".to_string()];
        header.extend(self.grid.points().map(format_maturity));
        w.write_record(&header)?;
        for (i, d) in self.dates.iter().enumerate() {
            let mut rec = vec![d.format("%Y-%m-%d").to_string()];
            rec.extend(self.rows.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a panel written by [`CurvePanel::write_csv`]. The result is never centered.
    pub fn read_csv<R: Read>(input: R) -> Result<CurvePanel> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(input);
        let header = r.headers()?.clone();
        if header.is_empty() || header.get(0).map(str::trim) != Some("date") {
            return Err(FarError::Parse { line: 1, msg: "header must start with `date`".into() });
        }
        let points = header
            .iter()
            .skip(1)
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| FarError::Parse {
                    line: 1,
                    msg: format!("bad maturity `{s}` in header"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let grid = Grid::from_points(&points)?;

        let mut dates = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.len() != grid.len() + 1 {
                return Err(FarError::Parse {
                    line,
                    msg: format!("expected {} fields, got {}", grid.len() + 1, rec.len()),
                });
            }
            let date = parse_date(&rec[0], line)?;
            dates.push(date);
            for s in rec.iter().skip(1) {
                let v: f64 = s
                    .trim()
                    .parse()
                    .map_err(|_| FarError::Parse { line, msg: format!("bad value `{s}`") })?;
                values.push(v);
            }
        }
        if dates.is_empty() {
            return Err(FarError::Empty("panel file has no rows".into()));
        }
        let rows = DMatrix::from_row_slice(dates.len(), grid.len(), &values);
        CurvePanel::new(grid, dates, rows)
    }
}

pub(crate) fn parse_date(s: &str, line: u64) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|e| FarError::Parse { line, msg: format!("bad date `{s}`: {e}") })
}

/// Integral maturities print without a fractional part.
pub(crate) fn format_maturity(t: f64) -> String {
    if t.fract() == 0.0 && t.abs() < 1e15 {
        format!("{}", t as i64)
    } else {
        t.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dates(n: usize) -> Vec<NaiveDate> {
        let d0 = NaiveDate::from_ymd_opt(2001, 1, 1).unwrap();
        (0..n).map(|i| d0 + chrono::Days::new(i as u64)).collect()
    }

    fn grid(m: usize) -> Grid {
        Grid::uniform(90.0, 30.0, m).unwrap()
    }

    #[test]
    fn centering_identical_rows() {
        let row = [0.01, 0.02, 0.03];
        let rows = DMatrix::from_fn(4, 3, |_, j| row[j]);
        let p = CurvePanel::new(grid(3), dates(4), rows).unwrap().center().unwrap();
        assert!(p.rows().amax() < 1e-17);
        assert_eq!(p.mean_curve().unwrap().as_slice(), &row);
    }

    #[test]
    fn centering_two_rows_is_symmetric() {
        let a = [1.0, 4.0];
        let b = [3.0, -2.0];
        let rows = DMatrix::from_row_slice(2, 2, &[a[0], a[1], b[0], b[1]]);
        let p = CurvePanel::new(grid(2), dates(2), rows).unwrap().center().unwrap();
        for j in 0..2 {
            assert!((p.rows()[(0, j)] - (a[j] - b[j]) / 2.0).abs() < 1e-15);
            assert!((p.rows()[(1, j)] + (a[j] - b[j]) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn center_twice_is_an_error() {
        let p = CurvePanel::new(grid(2), dates(2), DMatrix::zeros(2, 2)).unwrap();
        let c = p.center().unwrap();
        assert!(matches!(c.center(), Err(FarError::AlreadyCentered)));
    }

    #[test]
    fn rejects_unordered_dates() {
        let mut d = dates(3);
        d.swap(0, 1);
        assert!(CurvePanel::new(grid(2), d, DMatrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn difference_panel() {
        let rows = DMatrix::from_fn(5, 2, |i, j| (i * i) as f64 + j as f64);
        let p = CurvePanel::new(grid(2), dates(5), rows).unwrap();
        let d = p.difference(2).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.dates()[0], p.dates()[2]);
        assert_eq!(d.rows()[(0, 0)], 4.0);
        assert_eq!(d.rows()[(2, 1)], 16.0 - 4.0);
    }

    #[test]
    fn date_filter() {
        let p = CurvePanel::new(grid(2), dates(5), DMatrix::zeros(5, 2)).unwrap();
        let f = p.filter_dates(Some(p.dates()[1]), Some(p.dates()[3])).unwrap();
        assert_eq!(f.len(), 3);
        let none = NaiveDate::from_ymd_opt(1990, 1, 1).unwrap();
        assert!(matches!(p.filter_dates(None, Some(none)), Err(FarError::NoValidDates(_))));
    }

    #[test]
    fn csv_header_and_errors() {
        let rows = DMatrix::from_row_slice(1, 2, &[0.05, 0.051]);
        let p = CurvePanel::new(grid(2), dates(1), rows).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "date,90,120\n2001-01-01,0.05,0.051\n");

        let bad = "date,90,120\n2001-01-01,0.05\n";
        assert!(matches!(CurvePanel::read_csv(bad.as_bytes()), Err(FarError::Parse { line: 2, .. })));
    }

    proptest! {
        #[test]
        fn center_roundtrip_and_csv_exact(vals in prop::collection::vec(-1.0..1.0f64, 15)) {
            let rows = DMatrix::from_row_slice(5, 3, &vals);
            let p = CurvePanel::new(grid(3), dates(5), rows).unwrap();
            let c = p.center().unwrap();
            for col in c.rows().column_iter() {
                prop_assert!(col.sum().abs() / 5.0 <= 1e-12);
            }
            prop_assert_eq!(&c.uncenter().unwrap(), &p);

            let mut buf = Vec::new();
            p.write_csv(&mut buf).unwrap();
            let q = CurvePanel::read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(q, p);
        }
    }
}
