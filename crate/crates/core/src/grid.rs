//! Maturity grids and functions sampled on them.
//!
//! A [`Grid`] is a uniform set of maturities `origin + i * spacing`,
//! `i = 0..count`. Every point carries the quadrature weight `spacing`, so
//! the L² inner product of two sampled functions is `h * Σ x_i y_i`.
//!
//! Scaling the samples by `sqrt(h)` ([`Curve::whiten`]) turns that inner
//! product into the plain Euclidean one. All operators in this crate are
//! stored in those whitened coordinates.

use std::fmt;

use nalgebra::DVector;

use crate::error::{FarError, Result};

/// Relative tolerance used when comparing grid parameters.
const GRID_TOL: f64 = 1e-9;

/// Uniform maturity grid (maturities in days).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    origin: f64,
    spacing: f64,
    count: usize,
}

impl Grid {
    pub fn uniform(origin: f64, spacing: f64, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(FarError::InvalidGrid(format!("need at least 2 points, got {count}")));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(FarError::InvalidGrid(format!("spacing must be positive, got {spacing}")));
        }
        if !origin.is_finite() {
            return Err(FarError::InvalidGrid("origin must be finite".into()));
        }
        Ok(Grid { origin, spacing, count })
    }

    /// Grid `{min, min + spacing, ...}` up to and including `max` when it lands on the lattice.
    pub fn window(min: f64, max: f64, spacing: f64) -> Result<Self> {
        if !(max > min) {
            return Err(FarError::InvalidGrid(format!("empty window [{min}, {max}]")));
        }
        if !(spacing > 0.0) {
            return Err(FarError::InvalidGrid(format!("spacing must be positive, got {spacing}")));
        }
        let steps = ((max - min) / spacing * (1.0 + 1e-12)).floor() as usize;
        Grid::uniform(min, spacing, steps + 1)
    }

    /// Rebuild a grid from explicit points, checking uniform spacing.
    pub fn from_points(points: &[f64]) -> Result<Self> {
        if points.len() < 2 {
            return Err(FarError::InvalidGrid(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        let span = points[points.len() - 1] - points[0];
        let spacing = span / (points.len() - 1) as f64;
        if !(spacing > 0.0) {
            return Err(FarError::InvalidGrid("points must be strictly increasing".into()));
        }
        for (i, w) in points.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(FarError::InvalidGrid(format!("points not increasing at index {}", i + 1)));
            }
            if ((w[1] - w[0]) - spacing).abs() > GRID_TOL * spacing {
                return Err(FarError::InvalidGrid(format!("non-uniform spacing at index {}", i + 1)));
            }
        }
        Grid::uniform(points[0], spacing, points.len())
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    /// Last grid point.
    pub fn terminal(&self) -> f64 {
        self.point(self.count - 1)
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Quadrature weight carried by every point.
    pub fn weight(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(move |i| self.point(i))
    }

    /// Same `(count, spacing, origin)` up to a relative `1e-9`.
    pub fn compatible(&self, other: &Grid) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= GRID_TOL * (1.0 + a.abs().max(b.abs()));
        self.count == other.count && close(self.spacing, other.spacing) && close(self.origin, other.origin)
    }

    pub fn ensure_compatible(&self, other: &Grid) -> Result<()> {
        if self.compatible(other) {
            Ok(())
        } else {
            Err(FarError::GridMismatch { left: self.to_string(), right: other.to_string() })
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}..{} step {}, {} points]", self.origin, self.terminal(), self.spacing, self.count)
    }
}

/// A function of maturity sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    grid: Grid,
    values: DVector<f64>,
}

impl Curve {
    pub fn new(grid: Grid, values: DVector<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(FarError::InvalidCurve(format!(
                "{} values for a {}-point grid",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FarError::InvalidCurve(format!("non-finite value at index {i}")));
        }
        Ok(Curve { grid, values })
    }

    pub fn from_slice(grid: Grid, values: &[f64]) -> Result<Self> {
        Curve::new(grid, DVector::from_column_slice(values))
    }

    pub fn zeros(grid: Grid) -> Self {
        Curve { grid, values: DVector::zeros(grid.len()) }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Curve { grid, values: DVector::from_element(grid.len(), c) }
    }

    /// Sample `f` at every grid point.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Curve { grid, values: DVector::from_iterator(grid.len(), grid.points().map(f)) }
    }

    pub(crate) fn from_parts_unchecked(grid: Grid, values: DVector<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Curve { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn into_values(self) -> DVector<f64> {
        self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }

    /// L² inner product by the rectangle rule.
    pub fn inner(&self, other: &Curve) -> Result<f64> {
        self.grid.ensure_compatible(&other.grid)?;
        Ok(self.grid.weight() * self.values.dot(&other.values))
    }

    pub fn norm(&self) -> f64 {
        (self.grid.weight() * self.values.norm_squared()).sqrt()
    }

    pub fn whiten(&self) -> Whitened {
        Whitened { grid: self.grid, coords: &self.values * self.grid.weight().sqrt() }
    }

    pub fn sub(&self, other: &Curve) -> Result<Curve> {
        self.grid.ensure_compatible(&other.grid)?;
        Ok(Curve::from_parts_unchecked(self.grid, &self.values - &other.values))
    }

    pub fn add(&self, other: &Curve) -> Result<Curve> {
        self.grid.ensure_compatible(&other.grid)?;
        Ok(Curve::from_parts_unchecked(self.grid, &self.values + &other.values))
    }

    pub fn scale(&self, c: f64) -> Curve {
        Curve::from_parts_unchecked(self.grid, &self.values * c)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.amax()
    }
}

/// Samples scaled by `sqrt(h)`; Euclidean geometry here is L² geometry on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Whitened {
    grid: Grid,
    coords: DVector<f64>,
}

impl Whitened {
    pub fn new(grid: Grid, coords: DVector<f64>) -> Result<Self> {
        if coords.len() != grid.len() {
            return Err(FarError::InvalidCurve(format!(
                "{} coordinates for a {}-point grid",
                coords.len(),
                grid.len()
            )));
        }
        Ok(Whitened { grid, coords })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn into_coords(self) -> DVector<f64> {
        self.coords
    }

    pub fn dot(&self, other: &Whitened) -> Result<f64> {
        self.grid.ensure_compatible(&other.grid)?;
        Ok(self.coords.dot(&other.coords))
    }

    pub fn dewhiten(&self) -> Curve {
        Curve::from_parts_unchecked(self.grid, &self.coords / self.grid.weight().sqrt())
    }
}

/// Whitened coordinates to a curve, for internal code holding raw vectors.
pub(crate) fn dewhiten_vec(grid: Grid, coords: DVector<f64>) -> Curve {
    Curve::from_parts_unchecked(grid, coords / grid.weight().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn half_grid() -> Grid {
        Grid::uniform(0.0, 0.5, 2).unwrap()
    }

    #[test]
    fn inner_of_constants() {
        let one = Curve::constant(half_grid(), 1.0);
        let zero = Curve::zeros(half_grid());
        assert_eq!(one.inner(&one).unwrap(), 1.0);
        assert_eq!(one.inner(&zero).unwrap(), 0.0);
    }

    #[test]
    fn inner_hand_quadrature() {
        let g = Grid::uniform(0.0, 0.5, 3).unwrap();
        let x = Curve::from_slice(g, &[1.0, 2.0, 3.0]).unwrap();
        assert!((x.inner(&x).unwrap() - 7.0).abs() < 1e-15);
    }

    #[test]
    fn inner_rejects_grid_mismatch() {
        let a = Curve::zeros(Grid::uniform(0.0, 0.5, 3).unwrap());
        let b = Curve::zeros(Grid::uniform(0.0, 0.25, 3).unwrap());
        assert!(matches!(a.inner(&b), Err(FarError::GridMismatch { .. })));
    }

    #[test]
    fn norms() {
        assert_eq!(Curve::zeros(half_grid()).norm(), 0.0);
        assert_eq!(Curve::constant(half_grid(), 1.0).norm(), 1.0);
        let g = Grid::uniform(0.0, 1.0, 2).unwrap();
        assert!((Curve::from_slice(g, &[3.0, 4.0]).unwrap().norm() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn whitened_dot_matches_inner() {
        let x = Curve::from_slice(half_grid(), &[1.0, 2.0]).unwrap();
        let y = Curve::from_slice(half_grid(), &[3.0, 4.0]).unwrap();
        let d = x.whiten().dot(&y.whiten()).unwrap();
        assert!((d - 5.5).abs() < 1e-14);
        assert_eq!(Curve::zeros(half_grid()).whiten().coords().amax(), 0.0);
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::uniform(0.0, 1.0, 1).is_err());
        assert!(Grid::uniform(0.0, 0.0, 3).is_err());
        assert!(Grid::from_points(&[0.0, 1.0, 3.0]).is_err());
        assert!(Grid::from_points(&[0.0, 1.0, 1.0]).is_err());
        let g = Grid::from_points(&[90.0, 120.0, 150.0]).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.terminal(), 150.0);
    }

    #[test]
    fn window_grid_counts() {
        assert_eq!(Grid::window(90.0, 3480.0, 30.0).unwrap().len(), 114);
        assert_eq!(Grid::window(90.0, 120.0, 30.0).unwrap().len(), 2);
        assert_eq!(Grid::window(90.0, 130.0, 30.0).unwrap().len(), 2);
    }

    #[test]
    fn nonfinite_values_rejected() {
        assert!(Curve::from_slice(half_grid(), &[1.0, f64::NAN]).is_err());
        assert!(Curve::from_slice(half_grid(), &[1.0]).is_err());
    }

    #[test]
    fn quadrature_error_is_first_order() {
        // ∫_0^1 T^4 dT = 0.2 with left-endpoint sums.
        let err = |m: usize| {
            let g = Grid::uniform(0.0, 1.0 / m as f64, m).unwrap();
            let f = Curve::from_fn(g, |t| t * t);
            (f.inner(&f).unwrap() - 0.2).abs()
        };
        for m in [16, 32, 64, 128] {
            let ratio = err(m) / err(2 * m);
            assert!(ratio > 2.0 / 1.5 && ratio < 2.0 * 1.5, "ratio {ratio} at m={m}");
        }
    }

    fn curves(m: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, f64, f64, f64)> {
        let v = || prop::collection::vec(-10.0..10.0f64, m);
        (v(), v(), v(), 0.01..5.0f64, -3.0..3.0f64, -3.0..3.0f64)
    }

    proptest! {
        #[test]
        fn whitening_preserves_geometry((x, y, z, h, a, b) in curves(7)) {
            let g = Grid::uniform(0.0, h, 7).unwrap();
            let (x, y, z) = (
                Curve::from_slice(g, &x).unwrap(),
                Curve::from_slice(g, &y).unwrap(),
                Curve::from_slice(g, &z).unwrap(),
            );
            let ip = x.inner(&y).unwrap();
            let d = x.whiten().dot(&y.whiten()).unwrap();
            prop_assert!((d - ip).abs() <= 1e-12 * (1.0 + ip.abs()));

            let back = x.whiten().dewhiten();
            for (u, v) in back.as_slice().iter().zip(x.as_slice()) {
                prop_assert!((u - v).abs() <= 1e-12 * (1.0 + v.abs()));
            }

            prop_assert_eq!(x.inner(&y).unwrap(), y.inner(&x).unwrap());
            let lhs = x.scale(a).add(&y.scale(b)).unwrap().inner(&z).unwrap();
            let rhs = a * x.inner(&z).unwrap() + b * y.inner(&z).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }
    }
}
