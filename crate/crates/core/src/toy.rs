//! Two-dimensional example with closed forms.
//!
//! The state is `(x_t, y_t)` with independent AR(1) components
//! `x_{t+1} = a x_t + ε` and `y_{t+1} = b y_t + η`. When `a > b` but `y` has
//! the larger variance, principal components keep `y` while the best rank-one
//! forecast keeps `x`. The example lives on a two-point grid with unit
//! spacing so the generic operator code applies unchanged.

use std::fmt;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{FarError, Result};
use crate::grid::{Curve, Grid};
use crate::moments::SampleMoments;
use crate::operator::LinOp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyParams {
    pub a: f64,
    pub b: f64,
    pub var_eps: f64,
    pub var_eta: f64,
}

impl ToyParams {
    pub fn new(a: f64, b: f64, var_eps: f64, var_eta: f64) -> Result<Self> {
        let p = ToyParams { a, b, var_eps, var_eta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite();
        if !(ok(self.a) && self.a.abs() < 1.0) || !(ok(self.b) && self.b.abs() < 1.0) {
            return Err(FarError::InvalidParameter(format!(
                "persistence must satisfy |a|, |b| < 1, got a={}, b={}",
                self.a, self.b
            )));
        }
        if !(ok(self.var_eps) && self.var_eps > 0.0) || !(ok(self.var_eta) && self.var_eta > 0.0) {
            return Err(FarError::InvalidParameter(format!(
                "innovation variances must be positive, got {} and {}",
                self.var_eps, self.var_eta
            )));
        }
        Ok(())
    }

    /// Stationary variance of `x`.
    pub fn var_x(&self) -> f64 {
        self.var_eps / (1.0 - self.a * self.a)
    }

    /// Stationary variance of `y`.
    pub fn var_y(&self) -> f64 {
        self.var_eta / (1.0 - self.b * self.b)
    }

    /// `a > b` while `y` carries more variance: the case where the two
    /// rank-one methods can disagree.
    pub fn is_contrasting(&self) -> bool {
        self.a > self.b && self.var_x() < self.var_y()
    }

    /// Pencil eigenvalues of the `x` and `y` directions.
    pub fn pencil_eigenvalues(&self) -> (f64, f64) {
        (self.a * self.a * self.var_x(), self.b * self.b * self.var_y())
    }

    /// The unit-spacing two-point grid.
    pub fn grid() -> Grid {
        Grid::uniform(0.0, 1.0, 2).expect("two-point grid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyPopulation {
    pub gamma11: Matrix2<f64>,
    pub gamma12: Matrix2<f64>,
    pub rho: Matrix2<f64>,
}

impl ToyPopulation {
    /// The population as operators on [`ToyParams::grid`], lag one, mean zero.
    pub fn moments(&self) -> Result<SampleMoments> {
        let g = ToyParams::grid();
        let to_dyn = |m: &Matrix2<f64>| nalgebra::DMatrix::from_fn(2, 2, |i, j| m[(i, j)]);
        let cov = LinOp::from_whitened(g, to_dyn(&self.gamma11))?;
        let cross = LinOp::from_whitened(g, to_dyn(&self.gamma12))?;
        SampleMoments::from_operators(Curve::zeros(g), cov, cross, 1)
    }
}

pub fn toy_population(p: &ToyParams) -> ToyPopulation {
    let rho = Matrix2::new(p.a, 0.0, 0.0, p.b);
    let gamma11 = Matrix2::new(p.var_x(), 0.0, 0.0, p.var_y());
    ToyPopulation { gamma11, gamma12: rho * gamma11, rho }
}

/// Mean squared errors of the rank-one forecasts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyLosses {
    /// Keeping `y`, the principal component when `Var y > Var x`.
    pub pc: f64,
    /// Keeping `x`, the canonical-correlation choice when `a > b`.
    pub cc: f64,
}

pub fn toy_losses(p: &ToyParams) -> ToyLosses {
    ToyLosses { pc: p.var_x() + p.var_eta, cc: p.var_eps + p.var_y() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// The first predictive factor is the `x` direction.
    CcLike,
    /// The first predictive factor is the `y` direction.
    PcLike,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::CcLike => "CC-like",
            Branch::PcLike => "PC-like",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyFactor {
    pub weight: Vector2<f64>,
    pub loading: Vector2<f64>,
    pub eigenvalue: f64,
    pub branch: Branch,
}

impl ToyFactor {
    /// The rank-one prediction map `a₁ b₁'`.
    pub fn prediction_map(&self) -> Matrix2<f64> {
        self.loading * self.weight.transpose()
    }
}

/// First predictive factor and loading in closed form.
pub fn toy_first_factor(p: &ToyParams) -> Result<ToyFactor> {
    p.validate()?;
    let (lx, ly) = p.pencil_eigenvalues();
    if lx == ly {
        return Err(FarError::InvalidParameter(format!(
            "pencil eigenvalues tie at {lx}; the first factor is not unique"
        )));
    }
    Ok(if lx > ly {
        ToyFactor {
            weight: Vector2::new((1.0 / p.var_x()).sqrt(), 0.0),
            loading: Vector2::new(p.a * p.var_x().sqrt(), 0.0),
            eigenvalue: lx,
            branch: Branch::CcLike,
        }
    } else {
        ToyFactor {
            weight: Vector2::new(0.0, (1.0 / p.var_y()).sqrt()),
            loading: Vector2::new(0.0, p.b * p.var_y().sqrt()),
            eigenvalue: ly,
            branch: Branch::PcLike,
        }
    })
}

/// Everything the `toy` command prints.
#[derive(Debug, Clone, Copy)]
pub struct ToyReport {
    pub params: ToyParams,
    pub population: ToyPopulation,
    pub losses: ToyLosses,
    pub factor: ToyFactor,
}

impl ToyReport {
    pub fn new(p: &ToyParams) -> Result<Self> {
        Ok(ToyReport {
            params: *p,
            population: toy_population(p),
            losses: toy_losses(p),
            factor: toy_first_factor(p)?,
        })
    }
}

impl fmt::Display for ToyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = &self.population.gamma11;
        let r = &self.population.rho;
        let p = &self.params;
        writeln!(f, "a={} b={} var_eps={} var_eta={}", p.a, p.b, p.var_eps, p.var_eta)?;
        writeln!(f, "Gamma11 = diag({}, {})", fmt_num(g[(0, 0)]), fmt_num(g[(1, 1)]))?;
        writeln!(f, "rho     = diag({}, {})", fmt_num(r[(0, 0)]), fmt_num(r[(1, 1)]))?;
        writeln!(f, "L_PC={}", fmt_num(self.losses.pc))?;
        writeln!(f, "L_CC={}", fmt_num(self.losses.cc))?;
        writeln!(f, "branch={}", self.factor.branch)?;
        let w = &self.factor.weight;
        let a = &self.factor.loading;
        writeln!(f, "weight=({}, {})", fmt_num(w[0]), fmt_num(w[1]))?;
        write!(f, "loading=({}, {})", fmt_num(a[0]), fmt_num(a[1]))
    }
}

/// Round away representation noise such as `2.2800000000000002`.
fn fmt_num(v: f64) -> String {
    let r = (v * 1e10).round() / 1e10;
    if r == 0.0 {
        "0".into()
    } else {
        r.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::FarModel;
    use crate::pencil::solve_pencil;

    fn reference() -> ToyParams {
        ToyParams::new(0.9, 0.6, 0.19, 1.28).unwrap()
    }

    #[test]
    fn reference_population() {
        let pop = toy_population(&reference());
        assert!((pop.gamma11 - Matrix2::new(1.0, 0.0, 0.0, 2.0)).amax() < 1e-12);
        assert_eq!(pop.rho, Matrix2::new(0.9, 0.0, 0.0, 0.6));
        assert!(reference().is_contrasting());
    }

    #[test]
    fn zero_persistence_and_symmetry() {
        let p = ToyParams::new(0.0, 0.0, 0.3, 0.5).unwrap();
        let pop = toy_population(&p);
        assert_eq!(pop.gamma12, Matrix2::zeros());
        assert_eq!(pop.rho, Matrix2::zeros());
        let l = toy_losses(&p);
        assert!((l.pc - 0.8).abs() < 1e-15 && (l.cc - 0.8).abs() < 1e-15);

        let s = ToyParams::new(0.5, 0.5, 0.7, 0.7).unwrap();
        let g = toy_population(&s).gamma11;
        assert_eq!(g[(0, 0)], g[(1, 1)]);
        assert_eq!(g[(0, 1)], 0.0);
        let l = toy_losses(&s);
        assert_eq!(l.pc, l.cc);
        assert!(toy_first_factor(&s).is_err());
    }

    #[test]
    fn reference_losses_and_factor() {
        let l = toy_losses(&reference());
        assert!((l.pc - 2.28).abs() < 1e-12);
        assert!((l.cc - 2.19).abs() < 1e-12);
        let f = toy_first_factor(&reference()).unwrap();
        assert_eq!(f.branch, Branch::CcLike);
        assert!((f.loading - Vector2::new(0.9, 0.0)).amax() < 1e-12);
        assert!((f.prediction_map() - Matrix2::new(0.9, 0.0, 0.0, 0.0)).amax() < 1e-12);
        // Predicting from (x, y) keeps only a·x.
        let pred = f.prediction_map() * Vector2::new(2.0, -3.0);
        assert!((pred - Vector2::new(1.8, 0.0)).amax() < 1e-12);
    }

    #[test]
    fn swapped_regime_is_pc_like() {
        let p = ToyParams::new(0.6, 0.9, 1.28, 0.19).unwrap();
        let f = toy_first_factor(&p).unwrap();
        assert_eq!(f.branch, Branch::PcLike);
        assert!((f.prediction_map() - Matrix2::new(0.0, 0.0, 0.0, 0.9)).amax() < 1e-12);
    }

    #[test]
    fn pencil_solver_agrees() {
        for p in [reference(), ToyParams::new(0.6, 0.9, 1.28, 0.19).unwrap(), ToyParams::new(-0.7, 0.2, 0.5, 3.0).unwrap()] {
            let m = toy_population(&p).moments().unwrap();
            let gram = m.cross.adjoint().compose(&m.cross).unwrap();
            let eig = solve_pencil(&gram, &m.cov, 1).unwrap();
            let f = toy_first_factor(&p).unwrap();
            assert!((eig.eigenvalues[0] - f.eigenvalue).abs() <= 1e-10 * f.eigenvalue);
            let v = eig.vector(0);
            assert!((v.values()[0] - f.weight[0]).abs() < 1e-10);
            assert!((v.values()[1] - f.weight[1]).abs() < 1e-10);

            let model = FarModel::predictive_factors(&m, 1, 0.0).unwrap();
            let map = model.rho().matrix();
            assert!((map[(0, 0)] - f.prediction_map()[(0, 0)]).abs() < 1e-10);
            assert!((map[(1, 1)] - f.prediction_map()[(1, 1)]).abs() < 1e-10);
        }
    }

    #[test]
    fn pca_keeps_the_high_variance_direction() {
        let p = reference();
        let m = toy_population(&p).moments().unwrap();
        let model = FarModel::pca(&m, 1).unwrap();
        let f = model.forecast(&Curve::from_slice(ToyParams::grid(), &[1.5, -2.0]).unwrap()).unwrap();
        assert!(f.values()[0].abs() < 1e-12);
        assert!((f.values()[1] - 0.6 * -2.0).abs() < 1e-12);
    }

    #[test]
    fn report_prints_rounded_values() {
        let text = ToyReport::new(&reference()).unwrap().to_string();
        assert!(text.contains("L_PC=2.28"));
        assert!(text.contains("L_CC=2.19"));
        assert!(text.contains("branch=CC-like"));
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ToyParams::new(1.0, 0.5, 1.0, 1.0).is_err());
        assert!(ToyParams::new(0.5, 0.5, 0.0, 1.0).is_err());
        assert!(ToyParams::new(0.5, f64::NAN, 1.0, 1.0).is_err());
    }
}
