//! Small dense helpers shared by the spectral, tree and model code.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) fn ensure_square(m: &DMatrix<f64>, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::validation(format!("{what} must be square, got {}x{}", m.nrows(), m.ncols())));
    }
    if m.nrows() == 0 {
        return Err(Error::validation(format!("{what} must be at least 1x1")));
    }
    Ok(m.nrows())
}

pub(crate) fn ensure_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::validation(format!("{what}[{i}][{j}] is not finite")));
            }
        }
    }
    Ok(())
}

/// Maximum absolute row sum.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

pub(crate) fn vec_inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// `M + diag(d)`.
pub fn add_diagonal(m: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    let mut out = m.clone();
    for (i, di) in d.iter().enumerate() {
        out[(i, i)] += di;
    }
    out
}

/// `μA + diag(q)`.
pub fn affine_family(a: &DMatrix<f64>, q: &[f64], mu: f64) -> DMatrix<f64> {
    add_diagonal(&(a * mu), q)
}

/// Solve `m x = b` with partial pivoting.
pub(crate) fn solve(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    m.clone().lu().solve(b).ok_or_else(|| Error::numeric("singular linear system", f64::NAN))
}

/// Sum-one normalized vector spanning the right null space of a rank `n-1`
/// matrix whose null vector has non-zero component sum.
///
/// One equation is replaced by the normalization `Σ x_i = 1` and the
/// resulting system is solved directly.
pub(crate) fn null_vector(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = m.nrows();
    if n == 1 {
        return Ok(DVector::from_element(1, 1.0));
    }
    let mut bordered = m.clone();
    // Rows are linearly dependent, so any one of them can carry the
    // normalization instead.
    for j in 0..n {
        bordered[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    solve(&bordered, &rhs)
}

/// Principal submatrix with row and column `k` removed.
pub(crate) fn principal_minor(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    m.clone().remove_row(k).remove_column(k)
}

/// Maximum real part over the full spectrum (dense Schur route).
pub fn max_real_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Maximum modulus over the full spectrum.
pub fn spectral_radius_dense(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_vector_of_two_patch_laplacian() {
        let a = DMatrix::from_row_slice(2, 2, &[-3.0, 2.0, 3.0, -2.0]);
        let v = null_vector(&a).unwrap();
        assert!((v[0] - 0.4).abs() < 1e-15);
        assert!((v[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn dense_spectrum_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 5.0, -1.0]));
        assert_eq!(max_real_eigenvalue(&m), 5.0);
        assert_eq!(spectral_radius_dense(&m), 5.0);
    }
}
