//! Reduced-rank functional autoregressions `f_{t+l} = ρ f_t + ε`, `ρ̂ = A B'`.
//!
//! * Predictive factors: `B` holds the top-`k` eigenvectors of the pencil
//!   `Γ̂₂₁Γ̂₁₂ - λ(Γ̂₁₁ + αI)`, normalized by `b'(Γ̂₁₁ + αI)b = 1`, and
//!   `A = Γ̂₁₂ B`. Each eigenvalue is the reduction in mean squared forecast
//!   error contributed by its factor.
//! * Principal components: `ρ̂` acts as `Γ̃₁₂ Γ̃₁₁⁻¹` on the span of the top-`k`
//!   eigenvectors of `Γ̂₁₁` and as zero on its orthogonal complement.
//!
//! Both are stored in the same `A B'` form, in whitened coordinates.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Forecaster, History};
use crate::error::{FarError, Result};
use crate::grid::{dewhiten_vec, Curve, Grid};
use crate::moments::SampleMoments;
use crate::operator::LinOp;
use crate::panel::CurvePanel;
use crate::pencil::{solve_pencil, sorted_symmetric_eigen};

/// Covariance eigenvalues below this fraction of the largest count as zero.
const SPECTRUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FarKind {
    PredictiveFactor,
    Pca,
}

#[derive(Debug, Clone)]
pub struct FarModel {
    kind: FarKind,
    grid: Grid,
    mean: Curve,
    lag: usize,
    k: usize,
    alpha: Option<f64>,
    /// Whitened factor weights `b_j`, one per column.
    factors: DMatrix<f64>,
    /// Whitened loadings `a_j`, one per column.
    loadings: DMatrix<f64>,
    rho: LinOp,
    eigenvalues: Vec<f64>,
    degenerate: bool,
    ties: Vec<(usize, usize)>,
}

impl FarModel {
    /// Predictive-factor fit from sample (or population) moments.
    pub fn predictive_factors(moments: &SampleMoments, k: usize, alpha: f64) -> Result<Self> {
        let m = moments.grid.len();
        if k == 0 || k > m {
            return Err(FarError::RankOutOfRange { k, max: m });
        }
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(FarError::InvalidParameter(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        if moments.is_degenerate() {
            return Ok(FarModel::zero(FarKind::PredictiveFactor, moments, k, Some(alpha)));
        }

        let gram = moments.cross.adjoint().compose(&moments.cross)?;
        let gram = LinOp::symmetric_unchecked(moments.grid, gram.matrix().clone());
        let metric = moments.cov.add_identity(alpha);
        let eig = match solve_pencil(&gram, &metric, k) {
            Ok(e) => e,
            Err(FarError::NotPositiveDefinite { eigenvalue, .. }) if alpha == 0.0 => {
                return Err(FarError::DegenerateCovariance(format!(
                    "smallest covariance eigenvalue {eigenvalue:e}"
                )))
            }
            Err(e) => return Err(e),
        };

        let factors = eig.vectors;
        let loadings = moments.cross.matrix() * &factors;
        let rho = LinOp::from_whitened(moments.grid, &loadings * factors.transpose())?;
        Ok(FarModel {
            kind: FarKind::PredictiveFactor,
            grid: moments.grid,
            mean: moments.mean.clone(),
            lag: moments.lag,
            k,
            alpha: Some(alpha),
            factors,
            loadings,
            rho,
            eigenvalues: eig.eigenvalues,
            degenerate: false,
            ties: eig.ties,
        })
    }

    /// Principal-component fit from sample moments.
    pub fn pca(moments: &SampleMoments, k: usize) -> Result<Self> {
        let m = moments.grid.len();
        if k == 0 || k > m {
            return Err(FarError::RankOutOfRange { k, max: m });
        }
        if moments.is_degenerate() {
            return Ok(FarModel::zero(FarKind::Pca, moments, k, None));
        }

        let (values, vectors) = sorted_symmetric_eigen(moments.cov.matrix());
        let top = values[0];
        let nonzero = values.iter().take_while(|&&v| top > 0.0 && v > SPECTRUM_TOL * top).count();
        if k > nonzero {
            return Err(FarError::SpectrumTooSmall { k, nonzero });
        }

        let basis = vectors.columns(0, k).into_owned();
        let mut factors = basis.clone();
        for j in 0..k {
            factors.column_mut(j).scale_mut(1.0 / values[j].sqrt());
        }
        // Project the output onto the principal subspace as well.
        let loadings = &basis * (basis.transpose() * (moments.cross.matrix() * &factors));
        let rho = LinOp::from_whitened(moments.grid, &loadings * factors.transpose())?;
        Ok(FarModel {
            kind: FarKind::Pca,
            grid: moments.grid,
            mean: moments.mean.clone(),
            lag: moments.lag,
            k,
            alpha: None,
            factors,
            loadings,
            rho,
            eigenvalues: values[..k].to_vec(),
            degenerate: false,
            ties: Vec::new(),
        })
    }

    /// `ρ̂ = 0`: a sample with no variation forecasts its mean.
    fn zero(kind: FarKind, moments: &SampleMoments, k: usize, alpha: Option<f64>) -> Self {
        let m = moments.grid.len();
        FarModel {
            kind,
            grid: moments.grid,
            mean: moments.mean.clone(),
            lag: moments.lag,
            k,
            alpha,
            factors: DMatrix::zeros(m, k),
            loadings: DMatrix::zeros(m, k),
            rho: LinOp::zero(moments.grid),
            eigenvalues: vec![0.0; k],
            degenerate: true,
            ties: Vec::new(),
        }
    }

    pub fn kind(&self) -> FarKind {
        self.kind
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mean_curve(&self) -> &Curve {
        &self.mean
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn rank(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    /// No regularization: the predictive-factor estimate is not consistent.
    pub fn is_unregularized(&self) -> bool {
        self.kind == FarKind::PredictiveFactor && self.alpha == Some(0.0)
    }

    /// The training sample had no variation and `ρ̂ = 0`.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Pencil eigenvalues (predictive factors) or covariance eigenvalues (PCA), descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn ties(&self) -> &[(usize, usize)] {
        &self.ties
    }

    pub fn rho(&self) -> &LinOp {
        &self.rho
    }

    /// Factor weight function `b_j`; the factor value is `<b_j, f>`.
    pub fn factor(&self, j: usize) -> Curve {
        dewhiten_vec(self.grid, self.factors.column(j).into_owned())
    }

    /// Loading curve `a_j`.
    pub fn loading(&self, j: usize) -> Curve {
        dewhiten_vec(self.grid, self.loadings.column(j).into_owned())
    }

    pub fn factors_whitened(&self) -> &DMatrix<f64> {
        &self.factors
    }

    pub fn loadings_whitened(&self) -> &DMatrix<f64> {
        &self.loadings
    }

    /// `f̄ + ρ̂ (f_now - f̄)`.
    pub fn forecast(&self, f_now: &Curve) -> Result<Curve> {
        let dev = f_now.sub(&self.mean)?;
        self.mean.add(&self.rho.apply(&dev)?)
    }
}

impl Forecaster for FarModel {
    fn forecast(&self, history: &History<'_>) -> Result<Curve> {
        FarModel::forecast(self, &history.latest())
    }
}

/// Predictive-factor FAR on a centered panel at lag `lag`.
pub fn fit_predictive_factors(p: &CurvePanel, lag: usize, k: usize, alpha: f64) -> Result<FarModel> {
    FarModel::predictive_factors(&SampleMoments::from_panel(p, lag)?, k, alpha)
}

/// Principal-component FAR on a centered panel at lag `lag`.
pub fn fit_pca_far(p: &CurvePanel, lag: usize, k: usize) -> Result<FarModel> {
    if k == 0 {
        return Err(FarError::RankOutOfRange { k, max: p.grid().len() });
    }
    FarModel::pca(&SampleMoments::from_panel(p, lag)?, k)
}

/// An autoregression on lag-`l` changes, integrated back to levels:
/// `f̂_{t+l} = f_t + forecast(f_t - f_{t-l})`.
#[derive(Debug, Clone)]
pub struct DifferencedFar {
    inner: FarModel,
}

impl DifferencedFar {
    /// Wrap a model fitted on a differenced, centered panel.
    pub fn new(inner: FarModel) -> Self {
        DifferencedFar { inner }
    }

    pub fn fit_predictive_factors(raw: &CurvePanel, lag: usize, k: usize, alpha: f64) -> Result<Self> {
        let d = raw.difference(lag)?.center()?;
        Ok(DifferencedFar::new(fit_predictive_factors(&d, lag, k, alpha)?))
    }

    pub fn fit_pca(raw: &CurvePanel, lag: usize, k: usize) -> Result<Self> {
        let d = raw.difference(lag)?.center()?;
        Ok(DifferencedFar::new(fit_pca_far(&d, lag, k)?))
    }

    pub fn model(&self) -> &FarModel {
        &self.inner
    }
}

impl Forecaster for DifferencedFar {
    fn forecast(&self, history: &History<'_>) -> Result<Curve> {
        let lag = self.inner.lag();
        let now = history.latest();
        let before = history.lagged(lag).ok_or(FarError::TooFewRows { needed: lag, got: history.len() })?;
        let change = self.inner.forecast(&now.sub(&before)?)?;
        now.add(&change)
    }
}
