//! Hermitian eigendecomposition, delegated to nalgebra.

use nalgebra::{Complex, DMatrix};
use num_complex::Complex64;

use super::CMatrix;

fn to_nalgebra(m: &CMatrix) -> DMatrix<Complex<f64>> {
    // Symmetrize so round-off asymmetry does not leak into the solver.
    let n = m.rows();
    DMatrix::from_fn(n, n, |r, c| (m[(r, c)] + m[(c, r)].conj()) * 0.5)
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    assert!(m.is_square(), "eigenvalues of a non-square matrix");
    if m.rows() == 0 {
        return Vec::new();
    }
    let mut vals: Vec<f64> = to_nalgebra(m).symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Eigenpairs `(lambda, v)` of a Hermitian matrix, ascending in `lambda`.
pub fn hermitian_eigen(m: &CMatrix) -> Vec<(f64, Vec<Complex64>)> {
    assert!(m.is_square(), "eigenvectors of a non-square matrix");
    if m.rows() == 0 {
        return Vec::new();
    }
    let eig = to_nalgebra(m).symmetric_eigen();
    let mut pairs: Vec<(f64, Vec<Complex64>)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, &lambda)| {
            let col = eig.eigenvectors.column(k);
            (lambda, col.iter().map(|z| Complex64::new(z.re, z.im)).collect())
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}
