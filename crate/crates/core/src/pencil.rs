//! Symmetric-definite operator pencils `M - λN`.
//!
//! With the Cholesky factorization `N = L L'` the pencil is congruent to the
//! standard symmetric problem `L⁻¹ M L⁻ᵀ y = λ y`, and `b = L⁻ᵀ y` recovers
//! the pencil eigenvectors, automatically normalized so that `b_i' N b_j = δ_ij`.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{FarError, Result};
use crate::grid::{dewhiten_vec, Curve};
use crate::operator::LinOp;

/// Relative eigenvalue gap below which two eigenvalues are reported as tied.
pub const TIE_TOL: f64 = 1e-10;
/// `N` counts as positive definite when its smallest eigenvalue exceeds this
/// fraction of the largest.
pub const PD_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct PencilEigen {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Whitened eigenvectors, one per column, `N`-orthonormal.
    pub vectors: DMatrix<f64>,
    /// Index pairs `(j, j + 1)` whose eigenvalues agree within [`TIE_TOL`].
    /// The vectors inside a tied block are an arbitrary `N`-orthonormal basis.
    pub ties: Vec<(usize, usize)>,
    grid: crate::grid::Grid,
}

impl PencilEigen {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Eigenvector `j` as a function on the grid.
    pub fn vector(&self, j: usize) -> Curve {
        dewhiten_vec(self.grid, self.vectors.column(j).into_owned())
    }

    pub fn normalization(&self) -> &'static str {
        "b'Nb = 1"
    }
}

/// Top-`k` eigenpairs of `M - λN`, eigenvalues descending.
///
/// Each eigenvector is signed so that its largest-magnitude component is positive.
pub fn solve_pencil(m: &LinOp, n: &LinOp, k: usize) -> Result<PencilEigen> {
    m.grid().ensure_compatible(n.grid())?;
    let dim = m.grid().len();
    if k == 0 || k > dim {
        return Err(FarError::RankOutOfRange { k, max: dim });
    }
    if !m.is_symmetric() || !n.is_symmetric() {
        return Err(FarError::NotSymmetric);
    }

    let n_mat = symmetrize(n.matrix());
    let n_eig = SymmetricEigen::new(n_mat.clone()).eigenvalues;
    let largest = n_eig.max();
    let smallest = n_eig.min();
    if !(largest > 0.0) || smallest <= PD_TOL * largest {
        return Err(FarError::NotPositiveDefinite { eigenvalue: smallest, largest });
    }
    let chol = Cholesky::new(n_mat).ok_or(FarError::NotPositiveDefinite { eigenvalue: smallest, largest })?;
    let l = chol.l();

    // C = L⁻¹ M L⁻ᵀ, computed with two triangular solves.
    let x = l
        .solve_lower_triangular(&symmetrize(m.matrix()))
        .ok_or(FarError::NotPositiveDefinite { eigenvalue: smallest, largest })?;
    let c = l
        .solve_lower_triangular(&x.transpose())
        .ok_or(FarError::NotPositiveDefinite { eigenvalue: smallest, largest })?;
    let (values, ys) = sorted_symmetric_eigen(&symmetrize(&c));

    let lt = l.transpose();
    let mut vectors = DMatrix::zeros(dim, k);
    for j in 0..k {
        let b = lt
            .solve_upper_triangular(&ys.column(j).into_owned())
            .ok_or(FarError::NotPositiveDefinite { eigenvalue: smallest, largest })?;
        vectors.set_column(j, &orient(b));
    }
    let eigenvalues: Vec<f64> = values[..k].to_vec();
    let ties = find_ties(&values[..(k + 1).min(dim)]);
    Ok(PencilEigen { eigenvalues, vectors, ties, grid: *m.grid() })
}

/// Rayleigh quotient `b'Mb / b'Nb`.
pub fn rayleigh(m: &LinOp, n: &LinOp, b: &Curve) -> Result<f64> {
    m.grid().ensure_compatible(n.grid())?;
    m.grid().ensure_compatible(b.grid())?;
    let w = b.whiten().into_coords();
    if w.iter().all(|&v| v == 0.0) {
        return Err(FarError::ZeroVector);
    }
    let num = w.dot(&m.apply_whitened(&w));
    let den = w.dot(&n.apply_whitened(&w));
    Ok(num / den)
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues descending and
/// eigenvectors oriented by [`orient`].
pub(crate) fn sorted_symmetric_eigen(mat: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(mat.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(mat.nrows(), order.len());
    for (j, &i) in order.iter().enumerate() {
        vectors.set_column(j, &orient(eig.eigenvectors.column(i).into_owned()));
    }
    (values, vectors)
}

/// Flip `v` so that its largest-magnitude component is positive (first one on ties).
pub(crate) fn orient(v: DVector<f64>) -> DVector<f64> {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() * (1.0 + 1e-12) {
            best = i;
        }
    }
    if v.len() > 0 && v[best] < 0.0 {
        -v
    } else {
        v
    }
}

fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

fn find_ties(values: &[f64]) -> Vec<(usize, usize)> {
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    values
        .windows(2)
        .enumerate()
        .filter(|(_, w)| (w[0] - w[1]).abs() <= TIE_TOL * scale.max(f64::MIN_POSITIVE))
        .map(|(j, _)| (j, j + 1))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn grid(m: usize) -> Grid {
        Grid::uniform(0.0, 1.0, m).unwrap()
    }

    fn diag(vals: &[f64]) -> LinOp {
        LinOp::from_whitened(grid(vals.len()), DMatrix::from_diagonal(&DVector::from_column_slice(vals))).unwrap()
    }

    fn random_pd(m: usize, shift: f64, rng: &mut ChaCha8Rng) -> LinOp {
        let c = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut mat = c.transpose() * c / m as f64;
        for i in 0..m {
            mat[(i, i)] += shift;
        }
        LinOp::from_whitened(grid(m), mat).unwrap()
    }

    #[test]
    fn diagonal_pencil() {
        let e = solve_pencil(&diag(&[2.0, 1.0]), &LinOp::identity(grid(2)), 2).unwrap();
        assert_eq!(e.eigenvalues, vec![2.0, 1.0]);
        assert!((e.vectors[(0, 0)] - 1.0).abs() < 1e-15 && e.vectors[(1, 0)].abs() < 1e-15);
        assert!((e.vectors[(1, 1)] - 1.0).abs() < 1e-15 && e.vectors[(0, 1)].abs() < 1e-15);
        assert!(e.ties.is_empty());
    }

    #[test]
    fn pencil_of_equal_operators_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = random_pd(6, 0.2, &mut rng);
        let e = solve_pencil(&n, &n, 6).unwrap();
        for l in &e.eigenvalues {
            assert!((l - 1.0).abs() < 1e-10);
        }
        assert_eq!(e.ties.len(), 5);
    }

    #[test]
    fn residuals_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_pd(12, 0.0, &mut rng);
        let n = random_pd(12, 0.1, &mut rng);
        let e = solve_pencil(&m, &n, 12).unwrap();
        for j in 0..12 {
            let b = e.vectors.column(j).into_owned();
            let r = m.matrix() * &b - n.matrix() * &b * e.eigenvalues[j];
            assert!(r.norm() <= 1e-8 * (1.0 + e.eigenvalues[j]) * (1.0 + m.hs_norm()));
            assert!(e.eigenvalues[j] >= -1e-10);
            let big = b.iamax();
            assert!(b[big] > 0.0);
        }
        let gram = e.vectors.transpose() * n.matrix() * &e.vectors;
        assert!((gram - DMatrix::identity(12, 12)).amax() < 1e-8);
        assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rejects_indefinite_and_bad_rank() {
        let m = diag(&[1.0, 1.0]);
        match solve_pencil(&m, &diag(&[1.0, 0.0]), 1) {
            Err(FarError::NotPositiveDefinite { eigenvalue, .. }) => assert_eq!(eigenvalue, 0.0),
            other => panic!("{other:?}"),
        }
        assert!(matches!(solve_pencil(&m, &diag(&[1.0, -2.0]), 1), Err(FarError::NotPositiveDefinite { .. })));
        assert!(matches!(solve_pencil(&m, &m, 0), Err(FarError::RankOutOfRange { .. })));
        assert!(matches!(solve_pencil(&m, &m, 3), Err(FarError::RankOutOfRange { .. })));
        let skew = LinOp::from_whitened(grid(2), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])).unwrap();
        assert!(matches!(solve_pencil(&skew, &m, 1), Err(FarError::NotSymmetric)));
    }

    #[test]
    fn rayleigh_quotients() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random_pd(5, 0.0, &mut rng);
        let n = random_pd(5, 0.3, &mut rng);
        let e = solve_pencil(&m, &n, 5).unwrap();
        for j in 0..5 {
            let r = rayleigh(&m, &n, &e.vector(j)).unwrap();
            assert!((r - e.eigenvalues[j]).abs() < 1e-10 * (1.0 + e.eigenvalues[j]));
        }
        let b = e.vector(0).add(&e.vector(3)).unwrap();
        let r1 = rayleigh(&m, &n, &b).unwrap();
        let r2 = rayleigh(&m, &n, &b.scale(7.3)).unwrap();
        assert!((r1 - r2).abs() < 1e-12 * r1.abs());
        assert!(matches!(rayleigh(&m, &n, &Curve::zeros(grid(5))), Err(FarError::ZeroVector)));

        let mut worst = f64::NEG_INFINITY;
        for _ in 0..10_000 {
            let b = Curve::from_slice(grid(5), &(0..5).map(|_| rng.sample(StandardNormal)).collect::<Vec<f64>>())
                .unwrap();
            worst = worst.max(rayleigh(&m, &n, &b).unwrap());
        }
        assert!(worst <= e.eigenvalues[0] + 1e-9);
    }

    #[test]
    fn eigenvalues_continuous_in_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = random_pd(8, 0.0, &mut rng);
        let gamma = random_pd(8, 0.05, &mut rng);
        for alpha in [0.0, 0.01, 0.1] {
            let a = solve_pencil(&m, &gamma.add_identity(alpha), 8).unwrap();
            let b = solve_pencil(&m, &gamma.add_identity(alpha + 1e-6), 8).unwrap();
            for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
                assert!((x - y).abs() <= 1e-3 * (1.0 + x));
            }
        }
    }
}
