//! Discretized Hilbert–Schmidt integral operators.
//!
//! An operator `(A x)(T) = ∫ A(S, T) x(S) dS` is stored as the matrix that
//! maps whitened input coordinates to whitened output coordinates:
//! `mat[i][j] = h * A(S_j, T_i)`. In this form composition is the matrix
//! product, the adjoint is the transpose, the L² identity is the identity
//! matrix and the Hilbert–Schmidt norm is the Frobenius norm.
//!
//! Kernels exported to CSV use the integral convention above: rows are the
//! integration variable `S`, columns the output maturity `T`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{FarError, Result};
use crate::grid::{Curve, Grid};
use crate::panel::{format_maturity, CurvePanel};

const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LinOp {
    grid: Grid,
    mat: DMatrix<f64>,
    symmetric: bool,
}

impl LinOp {
    /// Operator from its whitened-coordinate matrix.
    pub fn from_whitened(grid: Grid, mat: DMatrix<f64>) -> Result<Self> {
        let m = grid.len();
        if mat.nrows() != m || mat.ncols() != m {
            return Err(FarError::InvalidParameter(format!(
                "{}x{} matrix for a {m}-point grid",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if mat.iter().any(|v| !v.is_finite()) {
            return Err(FarError::InvalidParameter("operator has non-finite entries".into()));
        }
        let symmetric = is_symmetric(&mat);
        Ok(LinOp { grid, mat, symmetric })
    }

    /// Operator from kernel samples `kernel[(j, i)] = A(S_j, T_i)`.
    pub fn from_kernel(grid: Grid, kernel: &DMatrix<f64>) -> Result<Self> {
        LinOp::from_whitened(grid, kernel.transpose() * grid.weight())
    }

    /// Operator with kernel `k(S, T)`.
    pub fn from_kernel_fn(grid: Grid, k: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let m = grid.len();
        let kernel = DMatrix::from_fn(m, m, |j, i| k(grid.point(j), grid.point(i)));
        LinOp::from_kernel(grid, &kernel)
    }

    pub fn identity(grid: Grid) -> Self {
        LinOp { grid, mat: DMatrix::identity(grid.len(), grid.len()), symmetric: true }
    }

    pub fn zero(grid: Grid) -> Self {
        LinOp { grid, mat: DMatrix::zeros(grid.len(), grid.len()), symmetric: true }
    }

    /// Internal constructor for results of exact symmetric constructions.
    pub(crate) fn symmetric_unchecked(grid: Grid, mat: DMatrix<f64>) -> Self {
        let mat = (&mat + mat.transpose()) * 0.5;
        LinOp { grid, mat, symmetric: true }
    }

    pub(crate) fn from_parts(grid: Grid, mat: DMatrix<f64>) -> Self {
        let symmetric = is_symmetric(&mat);
        LinOp { grid, mat, symmetric }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Whitened-coordinate matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Kernel samples with rows indexed by `S` and columns by `T`.
    pub fn kernel(&self) -> DMatrix<f64> {
        self.mat.transpose() / self.grid.weight()
    }

    pub fn apply(&self, x: &Curve) -> Result<Curve> {
        self.grid.ensure_compatible(x.grid())?;
        // sqrt(h) factors cancel: dewhiten(mat * whiten(x)) = mat * x.
        Ok(Curve::from_parts_unchecked(self.grid, &self.mat * x.values()))
    }

    pub(crate) fn apply_whitened(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.mat * w
    }

    /// `self ∘ other`, i.e. `other` applied first.
    pub fn compose(&self, other: &LinOp) -> Result<LinOp> {
        self.grid.ensure_compatible(&other.grid)?;
        Ok(LinOp::from_parts(self.grid, &self.mat * &other.mat))
    }

    pub fn adjoint(&self) -> LinOp {
        LinOp { grid: self.grid, mat: self.mat.transpose(), symmetric: self.symmetric }
    }

    pub fn add(&self, other: &LinOp) -> Result<LinOp> {
        self.grid.ensure_compatible(&other.grid)?;
        Ok(LinOp::from_parts(self.grid, &self.mat + &other.mat))
    }

    pub fn sub(&self, other: &LinOp) -> Result<LinOp> {
        self.grid.ensure_compatible(&other.grid)?;
        Ok(LinOp::from_parts(self.grid, &self.mat - &other.mat))
    }

    pub fn scale(&self, c: f64) -> LinOp {
        LinOp { grid: self.grid, mat: &self.mat * c, symmetric: self.symmetric }
    }

    /// `self + alpha * I`.
    pub fn add_identity(&self, alpha: f64) -> LinOp {
        let mut mat = self.mat.clone();
        for i in 0..mat.nrows() {
            mat[(i, i)] += alpha;
        }
        LinOp { grid: self.grid, mat, symmetric: self.symmetric }
    }

    pub fn hs_norm(&self) -> f64 {
        self.mat.norm()
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace()
    }

    /// Write the kernel as CSV: header `maturity_days,<T_1>,...`, one row per `S`.
    pub fn write_kernel_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["maturity_days".to_string()];
        header.extend(self.grid.points().map(format_maturity));
        w.write_record(&header)?;
        let k = self.kernel();
        for (j, s) in self.grid.points().enumerate() {
            let mut rec = vec![format_maturity(s)];
            rec.extend(k.row(j).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn is_symmetric(mat: &DMatrix<f64>) -> bool {
    if !mat.is_square() {
        return false;
    }
    let scale = 1.0 + mat.amax();
    (mat - mat.transpose()).amax() <= SYMMETRY_TOL * scale
}

/// Whitened rows of a panel, one curve per column.
pub(crate) fn whitened_columns(p: &CurvePanel) -> DMatrix<f64> {
    p.rows().transpose() * p.grid().weight().sqrt()
}

/// Empirical covariance operator `(1/n) Σ f_t f_t' - f̄ f̄'`.
pub fn emp_cov(p: &CurvePanel) -> Result<LinOp> {
    let n = p.len();
    if n < 2 {
        return Err(FarError::TooFewRows { needed: 1, got: n });
    }
    let w = whitened_columns(p);
    let mean = w.column_mean();
    let second = &w * w.transpose() / n as f64;
    Ok(LinOp::symmetric_unchecked(*p.grid(), second - &mean * mean.transpose()))
}

/// Empirical lag-`lag` cross-covariances `(Γ̂₁₂, Γ̂₂₁)`.
///
/// `Γ̂₁₂ x = (1/(n-l)) Σ f_{t+l} <f_t, x> - f̄ <f̄, x>`, built from the
/// `n - l` overlapping pairs with the full-sample mean in both slots.
pub fn emp_crosscov(p: &CurvePanel, lag: usize) -> Result<(LinOp, LinOp)> {
    let n = p.len();
    if lag == 0 {
        return Err(FarError::InvalidParameter("lag must be at least 1".into()));
    }
    if n <= lag {
        return Err(FarError::TooFewRows { needed: lag, got: n });
    }
    let w = whitened_columns(p);
    let mean = w.column_mean();
    let pairs = n - lag;
    let led = w.columns(lag, pairs);
    let lagged = w.columns(0, pairs);
    let cross = led * lagged.transpose() / pairs as f64 - &mean * mean.transpose();
    let g12 = LinOp::from_parts(*p.grid(), cross);
    let g21 = g12.adjoint();
    Ok((g12, g21))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use nalgebra::SymmetricEigen;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn unit_grid(m: usize) -> Grid {
        Grid::uniform(0.0, 1.0 / m as f64, m).unwrap()
    }

    fn dates(n: usize) -> Vec<NaiveDate> {
        let d0 = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
        (0..n).map(|i| d0 + chrono::Days::new(i as u64)).collect()
    }

    fn random_op(g: Grid, rng: &mut ChaCha8Rng) -> LinOp {
        let m = g.len();
        LinOp::from_whitened(g, DMatrix::from_fn(m, m, |_, _| rng.sample(StandardNormal))).unwrap()
    }

    #[test]
    fn identity_and_zero() {
        let g = unit_grid(5);
        let x = Curve::from_fn(g, |t| t.sin() + 0.3);
        assert_eq!(LinOp::identity(g).apply(&x).unwrap(), x);
        assert_eq!(LinOp::zero(g).apply(&x).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn constant_kernel_integrates() {
        let g = unit_grid(8);
        let a = LinOp::from_kernel_fn(g, |_, _| 1.0).unwrap();
        let y = a.apply(&Curve::constant(g, 1.0)).unwrap();
        for v in y.as_slice() {
            assert!((v - 1.0).abs() < 1e-10);
        }
        assert!((a.hs_norm() - 1.0).abs() < 1e-12);
        assert!((LinOp::from_kernel_fn(g, |_, _| 2.5).unwrap().hs_norm() - 2.5).abs() < 1e-12);
        assert_eq!(LinOp::zero(g).hs_norm(), 0.0);
    }

    #[test]
    fn kernel_orientation() {
        // A(S, T) = S: (A x)(T) = ∫ S x(S) dS does not depend on T.
        let g = unit_grid(4);
        let a = LinOp::from_kernel_fn(g, |s, _| s).unwrap();
        let y = a.apply(&Curve::constant(g, 1.0)).unwrap();
        let expect: f64 = g.points().sum::<f64>() * g.weight();
        for v in y.as_slice() {
            assert!((v - expect).abs() < 1e-14);
        }
        let k = a.kernel();
        assert!((k[(2, 0)] - g.point(2)).abs() < 1e-14);
    }

    #[test]
    fn algebra_identities() {
        let g = unit_grid(6);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (a, b, c) = (random_op(g, &mut rng), random_op(g, &mut rng), random_op(g, &mut rng));
        assert_eq!(LinOp::identity(g).compose(&a).unwrap(), a);
        assert_eq!(a.adjoint().adjoint(), a);

        let x = Curve::from_fn(g, |t| (3.0 * t).cos());
        let lhs = a.compose(&b).unwrap().apply(&x).unwrap();
        let rhs = a.apply(&b.apply(&x).unwrap()).unwrap();
        assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-12);

        let ab_c = a.compose(&b).unwrap().compose(&c).unwrap();
        let a_bc = a.compose(&b.compose(&c).unwrap()).unwrap();
        assert!(ab_c.sub(&a_bc).unwrap().matrix().amax() < 1e-12);

        assert!(a.compose(&b).unwrap().hs_norm() <= a.hs_norm() * b.hs_norm());

        let shifted = a.add_identity(0.5);
        for i in 0..6 {
            assert_eq!(shifted.matrix()[(i, i)], a.matrix()[(i, i)] + 0.5);
        }
    }

    #[test]
    fn adjoint_is_l2_adjoint() {
        let g = Grid::uniform(90.0, 30.0, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_op(g, &mut rng);
        let x = Curve::from_fn(g, |t| (t / 100.0).sin());
        let y = Curve::from_fn(g, |t| (t / 70.0).cos());
        let lhs = a.apply(&x).unwrap().inner(&y).unwrap();
        let rhs = x.inner(&a.adjoint().apply(&y).unwrap()).unwrap();
        assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn grid_mismatch_errors() {
        let a = LinOp::identity(unit_grid(3));
        let b = LinOp::identity(unit_grid(4));
        assert!(a.compose(&b).is_err());
        assert!(a.add(&b).is_err());
        assert!(a.apply(&Curve::zeros(unit_grid(4))).is_err());
    }

    #[test]
    fn constant_panel_has_zero_covariance() {
        let g = unit_grid(3);
        let rows = DMatrix::from_fn(5, 3, |_, j| 0.05 + 0.01 * j as f64);
        let p = CurvePanel::new(g, dates(5), rows).unwrap();
        assert!(emp_cov(&p).unwrap().hs_norm() < 1e-15);
        let (g12, g21) = emp_crosscov(&p, 1).unwrap();
        assert!(g12.hs_norm() < 1e-15 && g21.hs_norm() < 1e-15);
    }

    #[test]
    fn two_row_covariance_is_outer_product() {
        let g = unit_grid(3);
        let a = [1.0, -2.0, 0.5];
        let rows = DMatrix::from_row_slice(2, 3, &[a[0], a[1], a[2], -a[0], -a[1], -a[2]]);
        let p = CurvePanel::new(g, dates(2), rows).unwrap();
        let k = emp_cov(&p).unwrap().kernel();
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[(i, j)] - a[i] * a[j]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn crosscov_hand_evaluation() {
        // 3x2 panel, lag 1, kernel Γ̂₁₂(T1, T2) = 1/2 Σ f_i(T1) f_{i+1}(T2) - f̄(T1) f̄(T2).
        let g = Grid::uniform(0.0, 0.5, 2).unwrap();
        let f = [[1.0, 2.0], [3.0, -1.0], [0.0, 4.0]];
        let rows = DMatrix::from_row_slice(3, 2, &[f[0][0], f[0][1], f[1][0], f[1][1], f[2][0], f[2][1]]);
        let p = CurvePanel::new(g, dates(3), rows).unwrap();
        let mean = [4.0 / 3.0, 5.0 / 3.0];
        let (g12, g21) = emp_crosscov(&p, 1).unwrap();
        let k = g12.kernel();
        for t1 in 0..2 {
            for t2 in 0..2 {
                let hand = (f[0][t1] * f[1][t2] + f[1][t1] * f[2][t2]) / 2.0 - mean[t1] * mean[t2];
                assert!((k[(t1, t2)] - hand).abs() < 1e-14, "({t1},{t2})");
            }
        }
        assert_eq!(g21, g12.adjoint());
    }

    #[test]
    fn covariance_errors() {
        let g = unit_grid(2);
        let p = CurvePanel::new(g, dates(1), DMatrix::zeros(1, 2)).unwrap();
        assert!(emp_cov(&p).is_err());
        let p = CurvePanel::new(g, dates(3), DMatrix::zeros(3, 2)).unwrap();
        assert!(emp_crosscov(&p, 3).is_err());
        assert!(emp_crosscov(&p, 0).is_err());
    }

    #[test]
    fn monte_carlo_diagonal_covariance() {
        let g = unit_grid(4);
        let sd = [0.5, 1.0, 1.5, 2.0];
        let n = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let rows = DMatrix::from_fn(n, 4, |_, j| sd[j] * rng.sample::<f64, _>(StandardNormal));
        let p = CurvePanel::new(g, dates(n), rows).unwrap();
        let est = emp_cov(&p).unwrap();
        let truth = LinOp::from_kernel(g, &DMatrix::from_diagonal(&DVector::from_iterator(4, sd.iter().map(|s| s * s))))
            .unwrap();
        let dist = est.sub(&truth).unwrap().hs_norm();
        assert!(dist <= 0.05 * truth.hs_norm(), "{dist}");

        let eig = SymmetricEigen::new(est.matrix().clone()).eigenvalues;
        assert!(eig.iter().all(|&l| l >= -1e-10));
    }
}
