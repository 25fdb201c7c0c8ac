//! Second-moment summaries shared by the autoregressive estimators.
//!
//! [`SampleMoments`] bundles the mean curve, `Γ̂₁₁` and the lag-`l`
//! cross-covariance `Γ̂₁₂` of a centered sample. [`ExpandingMoments`] keeps
//! running sums so an expanding-window backtest can refresh them in `O(m²)`
//! per new observation instead of rescanning the window.

use nalgebra::{DMatrix, DVector};

use crate::error::{FarError, Result};
use crate::grid::{dewhiten_vec, Curve, Grid};
use crate::operator::{emp_cov, emp_crosscov, LinOp};
use crate::panel::CurvePanel;

#[derive(Debug, Clone)]
pub struct SampleMoments {
    pub grid: Grid,
    /// Number of curves summarized.
    pub n: usize,
    pub lag: usize,
    pub mean: Curve,
    /// `Γ̂₁₁`.
    pub cov: LinOp,
    /// `Γ̂₁₂`: maps `f_t` directions to `f_{t+lag}`.
    pub cross: LinOp,
}

impl SampleMoments {
    /// Moments of a centered panel; the panel's stored mean becomes the model mean.
    pub fn from_panel(p: &CurvePanel, lag: usize) -> Result<Self> {
        let mean = p.mean_curve().ok_or(FarError::NotCentered)?.clone();
        let cov = emp_cov(p)?;
        let (cross, _) = emp_crosscov(p, lag)?;
        Ok(SampleMoments { grid: *p.grid(), n: p.len(), lag, mean, cov, cross })
    }

    /// Moments built directly from population operators.
    pub fn from_operators(mean: Curve, cov: LinOp, cross: LinOp, lag: usize) -> Result<Self> {
        mean.grid().ensure_compatible(cov.grid())?;
        cov.grid().ensure_compatible(cross.grid())?;
        Ok(SampleMoments { grid: *cov.grid(), n: usize::MAX, lag, mean, cov, cross })
    }

    /// True when the centered sample carries no variation at all.
    pub fn is_degenerate(&self) -> bool {
        let tr = self.cov.trace();
        let level = self.mean.norm().powi(2);
        tr <= f64::MIN_POSITIVE || tr <= 1e-14 * level
    }
}

/// Running sums over a growing sample, shifted by the first observation to
/// limit cancellation.
#[derive(Debug, Clone)]
pub struct ExpandingMoments {
    grid: Grid,
    lag: usize,
    shift: Option<DVector<f64>>,
    rows: Vec<DVector<f64>>,
    sum: DVector<f64>,
    outer: DMatrix<f64>,
    cross: DMatrix<f64>,
}

impl ExpandingMoments {
    pub fn new(grid: Grid, lag: usize) -> Result<Self> {
        if lag == 0 {
            return Err(FarError::InvalidParameter("lag must be at least 1".into()));
        }
        let m = grid.len();
        Ok(ExpandingMoments {
            grid,
            lag,
            shift: None,
            rows: Vec::new(),
            sum: DVector::zeros(m),
            outer: DMatrix::zeros(m, m),
            cross: DMatrix::zeros(m, m),
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, curve: &Curve) -> Result<()> {
        self.grid.ensure_compatible(curve.grid())?;
        let w = curve.whiten().into_coords();
        let shift = self.shift.get_or_insert_with(|| w.clone());
        let y = w - &*shift;
        self.sum += &y;
        self.outer.ger(1.0, &y, &y, 1.0);
        if self.rows.len() >= self.lag {
            let lagged = &self.rows[self.rows.len() - self.lag];
            self.cross.ger(1.0, &y, lagged, 1.0);
        }
        self.rows.push(y);
        Ok(())
    }

    /// Moments of the sample so far, identical in exact arithmetic to
    /// [`SampleMoments::from_panel`] on the centered window.
    pub fn moments(&self) -> Result<SampleMoments> {
        let n = self.rows.len();
        if n < 2 {
            return Err(FarError::TooFewRows { needed: 1, got: n });
        }
        if n <= self.lag {
            return Err(FarError::TooFewRows { needed: self.lag, got: n });
        }
        let shift = self.shift.as_ref().expect("non-empty window has a shift");
        let nf = n as f64;
        let mean = &self.sum / nf;
        let cov = &self.outer / nf - &mean * mean.transpose();

        let pairs = n - self.lag;
        let mut led = self.sum.clone();
        for y in &self.rows[..self.lag] {
            led -= y;
        }
        let mut lagged = self.sum.clone();
        for y in &self.rows[pairs..] {
            lagged -= y;
        }
        let cross = (&self.cross - &led * mean.transpose() - &mean * lagged.transpose()
            + &mean * mean.transpose() * pairs as f64)
            / pairs as f64;

        Ok(SampleMoments {
            grid: self.grid,
            n,
            lag: self.lag,
            mean: dewhiten_vec(self.grid, shift + &mean),
            cov: LinOp::symmetric_unchecked(self.grid, cov),
            cross: LinOp::from_whitened(self.grid, cross)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn expanding_matches_batch() {
        let g = Grid::uniform(90.0, 30.0, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 60;
        let rows = DMatrix::from_fn(n, 5, |i, j| 0.05 + 0.001 * (i as f64).sin() * (j + 1) as f64 + 1e-3 * rng.sample::<f64, _>(StandardNormal));
        let d0 = NaiveDate::from_ymd_opt(2000, 1, 3).unwrap();
        let dates: Vec<_> = (0..n).map(|i| d0 + chrono::Days::new(i as u64)).collect();
        let panel = CurvePanel::new(g, dates, rows).unwrap();

        let mut acc = ExpandingMoments::new(g, 3).unwrap();
        for t in 0..n {
            acc.push(&panel.curve(t)).unwrap();
            if t + 1 < 10 {
                continue;
            }
            let inc = acc.moments().unwrap();
            let batch = SampleMoments::from_panel(&panel.head(t + 1).unwrap().center().unwrap(), 3).unwrap();
            let scale = batch.cov.hs_norm();
            assert!(inc.cov.sub(&batch.cov).unwrap().hs_norm() <= 1e-9 * scale);
            assert!(inc.cross.sub(&batch.cross).unwrap().hs_norm() <= 1e-9 * scale);
            assert!(inc.mean.sub(&batch.mean).unwrap().max_abs() <= 1e-14);
        }
    }

    #[test]
    fn constant_stream_is_degenerate() {
        let g = Grid::uniform(0.0, 1.0, 3).unwrap();
        let mut acc = ExpandingMoments::new(g, 1).unwrap();
        let c = Curve::from_slice(g, &[0.05, 0.051, 0.0523]).unwrap();
        for _ in 0..10 {
            acc.push(&c).unwrap();
        }
        let m = acc.moments().unwrap();
        assert_eq!(m.cov.hs_norm(), 0.0);
        assert!(m.is_degenerate());
    }

    #[test]
    fn too_short_windows() {
        let g = Grid::uniform(0.0, 1.0, 2).unwrap();
        let mut acc = ExpandingMoments::new(g, 2).unwrap();
        acc.push(&Curve::zeros(g)).unwrap();
        assert!(acc.moments().is_err());
        acc.push(&Curve::zeros(g)).unwrap();
        assert!(acc.moments().is_err());
        acc.push(&Curve::zeros(g)).unwrap();
        assert!(acc.moments().is_ok());
        assert!(ExpandingMoments::new(g, 0).is_err());
    }
}
