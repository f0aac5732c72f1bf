//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Largest relative asymmetry `max|M − Mᵀ| / max(1, max|M|)`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax().max(1.0);
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in i + 1..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Undefined("matrix has non-finite entries".into()));
    }
    let mut ev = m.clone().symmetric_eigenvalues();
    ev.as_mut_slice().sort_by(f64::total_cmp);
    Ok(ev)
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    let ev = symmetric_eigenvalues(m)?;
    Ok(ev[ev.len() - 1])
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    Ok(symmetric_eigenvalues(m)?[0])
}

/// Quadratic form `xᵀ M x`.
pub fn quad(m: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(m * x))
}
