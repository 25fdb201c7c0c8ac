//! Forecasters: predictive-factor and principal-component FAR, random walk,
//! historical mean and Diebold–Li.

mod diebold_li;
mod far;
mod naive;

pub use diebold_li::{fit_diebold_li, nelson_siegel_basis, DieboldLiModel, DEFAULT_DECAY, DAYS_PER_MONTH};
pub use far::{fit_pca_far, fit_predictive_factors, DifferencedFar, FarKind, FarModel};
pub use naive::{forecast_mean, forecast_rw, HistoricalMean, RandomWalk};

use nalgebra::DMatrixView;

use crate::error::{FarError, Result};
use crate::grid::{Curve, Grid};
use crate::panel::CurvePanel;

/// The curves observed up to and including the forecast origin.
#[derive(Debug, Clone, Copy)]
pub struct History<'a> {
    grid: Grid,
    rows: DMatrixView<'a, f64>,
}

impl<'a> History<'a> {
    /// Rows `0..=end` of `panel`.
    pub fn new(panel: &'a CurvePanel, end: usize) -> Result<Self> {
        if end >= panel.len() {
            return Err(FarError::InvalidParameter(format!(
                "history end {end} beyond a {}-row panel",
                panel.len()
            )));
        }
        Ok(History { grid: *panel.grid(), rows: panel.rows().rows(0, end + 1) })
    }

    /// The full panel.
    pub fn all(panel: &'a CurvePanel) -> Result<Self> {
        if panel.is_empty() {
            return Err(FarError::Empty("history has no curves".into()));
        }
        History::new(panel, panel.len() - 1)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn rows(&self) -> &DMatrixView<'a, f64> {
        &self.rows
    }

    /// The curve `back` steps before the latest one.
    pub fn lagged(&self, back: usize) -> Option<Curve> {
        let n = self.len();
        (back < n).then(|| Curve::from_parts_unchecked(self.grid, self.rows.row(n - 1 - back).transpose()))
    }

    pub fn latest(&self) -> Curve {
        self.lagged(0).expect("history is never empty")
    }
}

/// Anything that maps the history at an origin to a curve forecast.
pub trait Forecaster {
    fn forecast(&self, history: &History<'_>) -> Result<Curve>;
}
