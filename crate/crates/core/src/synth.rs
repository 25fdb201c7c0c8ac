//! Simulated functional AR(1) panels with known population moments.
//!
//! A coefficient operator is accepted when some power `ρ^j` has HS norm
//! below one, which makes the recursion stationary.

use chrono::{Datelike, Days, NaiveDate, Weekday};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{FarError, Result};
use crate::grid::{Curve, Grid};
use crate::moments::SampleMoments;
use crate::operator::LinOp;
use crate::panel::CurvePanel;

const POP_TOL: f64 = 1e-12;
const POP_MAX_ITER: usize = 100_000;
/// Highest power of `ρ` inspected by the stationarity check.
const MAX_POWER: usize = 64;

/// Some power `ρ^j`, `j <= MAX_POWER`, has HS norm below one.
pub fn is_contracting(rho: &LinOp) -> bool {
    let mut power = rho.matrix().clone();
    for _ in 0..MAX_POWER {
        let norm = power.norm();
        if !norm.is_finite() {
            return false;
        }
        if norm < 1.0 {
            return true;
        }
        power = rho.matrix() * power;
    }
    false
}

/// Gaussian kernel `exp(-(S-T)²/(2w²))`, rescaled so its HS norm is `c`.
pub fn make_gaussian_kernel(grid: Grid, c: f64, w: f64) -> Result<LinOp> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(FarError::InvalidParameter(format!("amplitude must be >= 0, got {c}")));
    }
    if !(w > 0.0) || !w.is_finite() {
        return Err(FarError::InvalidParameter(format!("bandwidth must be positive, got {w}")));
    }
    if c == 0.0 {
        return Ok(LinOp::zero(grid));
    }
    let raw = LinOp::from_kernel_fn(grid, |s, t| (-(s - t).powi(2) / (2.0 * w * w)).exp())?;
    let norm = raw.hs_norm();
    Ok(LinOp::symmetric_unchecked(grid, raw.matrix() * (c / norm)))
}

/// Cosine mode `i` (`i = 0` is constant), orthonormal under the grid's quadrature.
pub fn cosine_mode(grid: Grid, i: usize) -> Curve {
    let m = grid.len() as f64;
    let raw = DVector::from_fn(grid.len(), |j, _| (std::f64::consts::PI * i as f64 * (j as f64 + 0.5) / m).cos());
    let curve = Curve::from_parts_unchecked(grid, raw);
    let norm = curve.norm();
    curve.scale(1.0 / norm)
}

/// One term `σ ξ e` of the innovation, `ξ` standard normal.
#[derive(Debug, Clone)]
pub struct NoiseTerm {
    pub basis: Curve,
    pub sd: f64,
}

/// The first `modes` cosine modes with standard deviations `scale / i`.
pub fn cosine_noise(grid: Grid, modes: usize, scale: f64) -> Vec<NoiseTerm> {
    (0..modes.min(grid.len()))
        .map(|i| NoiseTerm { basis: cosine_mode(grid, i), sd: scale / (i + 1) as f64 })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SimSpec {
    pub grid: Grid,
    pub rho: LinOp,
    pub noise: Vec<NoiseTerm>,
    pub n: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl SimSpec {
    /// Eight cosine modes with `σ_i = 0.02 / i`, 500 burn-in steps.
    pub fn new(rho: LinOp, n: usize, seed: u64) -> Self {
        let grid = *rho.grid();
        SimSpec { grid, noise: cosine_noise(grid, 8, 0.02), rho, n, burn_in: 500, seed }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.ensure_compatible(self.rho.grid())?;
        if !is_contracting(&self.rho) {
            return Err(FarError::InvalidParameter(format!(
                "no power up to {MAX_POWER} of rho has HS norm below 1 (HS norm {})",
                self.rho.hs_norm()
            )));
        }
        for term in &self.noise {
            self.grid.ensure_compatible(term.basis.grid())?;
            if !(term.sd >= 0.0) || !term.sd.is_finite() {
                return Err(FarError::InvalidParameter(format!("noise sd must be >= 0, got {}", term.sd)));
            }
        }
        if self.n == 0 {
            return Err(FarError::InvalidParameter("simulation length must be positive".into()));
        }
        Ok(())
    }

    /// Innovation covariance in whitened coordinates.
    pub fn noise_cov(&self) -> LinOp {
        let m = self.grid.len();
        let mut c = DMatrix::zeros(m, m);
        for term in &self.noise {
            let w = term.basis.whiten().into_coords();
            c.ger(term.sd * term.sd, &w, &w, 1.0);
        }
        LinOp::symmetric_unchecked(self.grid, c)
    }
}

/// Weekdays from 2000-01-03 onward.
pub fn weekday_dates(n: usize) -> Vec<NaiveDate> {
    let mut d = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

/// `f₀ = 0`, `f_{t+1} = ρ f_t + ε_{t+1}`; returns `n` curves after the burn-in.
pub fn simulate_far(spec: &SimSpec) -> Result<CurvePanel> {
    spec.validate()?;
    let m = spec.grid.len();
    let rho = spec.rho.matrix();
    let basis = DMatrix::from_columns(&spec.noise.iter().map(|t| t.basis.values().clone()).collect::<Vec<_>>());
    let sds = DVector::from_iterator(spec.noise.len(), spec.noise.iter().map(|t| t.sd));
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut f = DVector::zeros(m);
    let mut rows = DMatrix::zeros(spec.n, m);
    for t in 0..spec.burn_in + spec.n {
        let xi = DVector::from_fn(spec.noise.len(), |i, _| sds[i] * rng.sample::<f64, _>(StandardNormal));
        let mut next = rho * &f;
        if !spec.noise.is_empty() {
            next += &basis * xi;
        }
        f = next;
        if t >= spec.burn_in {
            rows.set_row(t - spec.burn_in, &f.transpose());
        }
    }
    CurvePanel::new(spec.grid, weekday_dates(spec.n), rows)
}

/// Stationary `Γ₁₁` and lag-one `Γ₁₂ = ρΓ₁₁`.
#[derive(Debug, Clone)]
pub struct Population {
    pub cov: LinOp,
    pub cross: LinOp,
}

impl Population {
    /// Lag-`lag` moments with mean zero: `Γ₁₂ = ρ^lag Γ₁₁`.
    pub fn moments(&self, rho: &LinOp, lag: usize) -> Result<SampleMoments> {
        let mut cross = self.cov.clone();
        for _ in 0..lag {
            cross = rho.compose(&cross)?;
        }
        SampleMoments::from_operators(Curve::zeros(*rho.grid()), self.cov.clone(), cross, lag)
    }
}

pub fn population_operators(spec: &SimSpec) -> Result<Population> {
    spec.validate()?;
    let rho = spec.rho.matrix();
    let c = spec.noise_cov().matrix().clone();
    let mut gamma = c.clone();
    for _ in 0..POP_MAX_ITER {
        let next = rho * &gamma * rho.transpose() + &c;
        let step = (&next - &gamma).norm();
        gamma = next;
        if step <= POP_TOL * gamma.norm().max(1.0) {
            let cov = LinOp::symmetric_unchecked(spec.grid, gamma);
            let cross = spec.rho.compose(&cov)?;
            return Ok(Population { cov, cross });
        }
    }
    Err(FarError::NoConvergence(POP_MAX_ITER))
}
