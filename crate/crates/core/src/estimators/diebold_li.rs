//! Diebold–Li: Nelson–Siegel coefficients per date, each following an AR(1).

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use super::{Forecaster, History};
use crate::error::{FarError, Result};
use crate::grid::{Curve, Grid};
use crate::panel::CurvePanel;

/// Decay per month used by Diebold and Li.
pub const DEFAULT_DECAY: f64 = 0.0609;

/// Maturities on the grid are in days; the decay is per month.
pub const DAYS_PER_MONTH: f64 = 30.0;

/// Relative threshold below which a regressor is treated as constant.
const FLAT_TOL: f64 = 1e-12;

/// The three Nelson–Siegel loadings at maturity `days`.
pub fn nelson_siegel_basis(days: f64, lambda: f64) -> [f64; 3] {
    let lt = lambda * days / DAYS_PER_MONTH;
    let e = (-lt).exp();
    [1.0, e, lt * e]
}

/// Intercept and slope of one coefficient's AR(1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArCoeffs {
    pub intercept: f64,
    pub slope: f64,
}

#[derive(Debug, Clone)]
pub struct DieboldLiModel {
    grid: Grid,
    lambda: f64,
    lag: usize,
    /// `n × 3`, one row of `(β₁, β₂, β₃)` per date.
    betas: DMatrix<f64>,
    ar: [ArCoeffs; 3],
    /// Least-squares projector from grid values to coefficients.
    projector: DMatrix<f64>,
    basis: DMatrix<f64>,
}

impl DieboldLiModel {
    /// Fit to rows of a raw (uncentered) panel.
    pub fn fit(p: &CurvePanel, lag: usize, lambda: f64) -> Result<Self> {
        DieboldLiModel::fit_rows(*p.grid(), p.rows().as_view(), lag, lambda)
    }

    fn fit_rows(grid: Grid, rows: nalgebra::DMatrixView<'_, f64>, lag: usize, lambda: f64) -> Result<Self> {
        if lag == 0 {
            return Err(FarError::InvalidParameter("lag must be at least 1".into()));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(FarError::InvalidParameter(format!("decay must be positive, got {lambda}")));
        }
        let m = grid.len();
        if m < 3 {
            return Err(FarError::CollinearBasis(format!("{m} maturities cannot identify three coefficients")));
        }
        let n = rows.nrows();
        if n <= lag {
            return Err(FarError::TooFewRows { needed: lag, got: n });
        }

        let basis = DMatrix::from_fn(m, 3, |i, j| nelson_siegel_basis(grid.point(i), lambda)[j]);
        let projector = basis
            .clone()
            .pseudo_inverse(1e-12)
            .map_err(|e| FarError::CollinearBasis(e.to_string()))?;
        let svd = basis.clone().svd(false, false);
        let sv = &svd.singular_values;
        if sv[2] <= 1e-10 * sv[0] {
            return Err(FarError::CollinearBasis(format!(
                "basis condition number {:e} on grid {grid}",
                sv[0] / sv[2]
            )));
        }

        let betas = rows * projector.transpose();
        let mut ar = [ArCoeffs { intercept: 0.0, slope: 0.0 }; 3];
        for (j, slot) in ar.iter_mut().enumerate() {
            let col = betas.column(j);
            *slot = ar1(col.rows(0, n - lag).as_slice(), col.rows(lag, n - lag).as_slice());
        }
        Ok(DieboldLiModel { grid, lambda, lag, betas, ar, projector, basis })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn betas(&self) -> &DMatrix<f64> {
        &self.betas
    }

    pub fn ar_coeffs(&self) -> &[ArCoeffs; 3] {
        &self.ar
    }

    /// Least-squares coefficients of one curve.
    pub fn project(&self, f: &Curve) -> Result<Vector3<f64>> {
        self.grid.ensure_compatible(f.grid())?;
        let b = &self.projector * f.values();
        Ok(Vector3::new(b[0], b[1], b[2]))
    }

    /// The Nelson–Siegel curve with coefficients `beta`.
    pub fn curve(&self, beta: &Vector3<f64>) -> Curve {
        let v: DVector<f64> = &self.basis * beta;
        Curve::from_parts_unchecked(self.grid, v)
    }

    /// Step each coefficient through its AR(1) and rebuild the curve.
    pub fn forecast_from_betas(&self, beta: &Vector3<f64>) -> Curve {
        let next = Vector3::from_fn(|j, _| self.ar[j].intercept + self.ar[j].slope * beta[j]);
        self.curve(&next)
    }

    /// Forecast from the latest observed curve.
    pub fn forecast(&self, f_now: &Curve) -> Result<Curve> {
        Ok(self.forecast_from_betas(&self.project(f_now)?))
    }
}

impl Forecaster for DieboldLiModel {
    fn forecast(&self, history: &History<'_>) -> Result<Curve> {
        DieboldLiModel::forecast(self, &history.latest())
    }
}

pub fn fit_diebold_li(p: &CurvePanel, lag: usize, lambda: f64) -> Result<DieboldLiModel> {
    DieboldLiModel::fit(p, lag, lambda)
}

/// OLS of `y` on `(1, x)`; a constant regressor leaves the mean of `y`.
fn ar1(x: &[f64], y: &[f64]) -> ArCoeffs {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let scale: f64 = x.iter().map(|v| v * v).sum();
    if sxx <= FLAT_TOL * scale || sxx == 0.0 {
        return ArCoeffs { intercept: my, slope: 0.0 };
    }
    let slope = sxy / sxx;
    ArCoeffs { intercept: my - slope * mx, slope }
}
