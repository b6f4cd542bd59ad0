//! Thin bridge between `ndarray` storage and `faer` dense decompositions.

use faer::{Mat, Side};
use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

pub(crate) fn to_faer(a: &Array2<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

pub(crate) fn from_faer(m: faer::MatRef<'_, f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// `A Bᵀ`.
pub(crate) fn mul_transpose(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let fa = to_faer(a);
    let fb = to_faer(b);
    let prod = &fa * fb.transpose();
    from_faer(prod.as_ref())
}

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order and the
/// matching unit eigenvectors as columns.
pub fn symmetric_eigen(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    let evd = to_faer(a)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::LinAlg(format!("symmetric eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    // faer returns ascending order.
    let values = Array1::from_iter((0..n).rev().map(|k| s[k]));
    let vectors = Array2::from_shape_fn((n, n), |(i, j)| u[(i, n - 1 - j)]);
    Ok((values, vectors))
}

/// Eigenvalues only, descending.
pub fn symmetric_eigenvalues(a: &Array2<f64>) -> Result<Array1<f64>> {
    let mut v = to_faer(a)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::LinAlg(format!("symmetric eigenvalues failed: {e:?}")))?;
    v.reverse();
    Ok(Array1::from_vec(v))
}

/// Thin SVD: singular values (descending), left and right singular vectors
/// as columns.
pub fn svd(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>, Array2<f64>)> {
    let dec = to_faer(a)
        .thin_svd()
        .map_err(|e| Error::LinAlg(format!("singular value decomposition failed: {e:?}")))?;
    let s = dec.S().column_vector();
    let values = Array1::from_iter((0..s.nrows()).map(|k| s[k]));
    Ok((values, from_faer(dec.U()), from_faer(dec.V())))
}

pub fn singular_values(a: &Array2<f64>) -> Result<Array1<f64>> {
    let v = to_faer(a)
        .singular_values()
        .map_err(|e| Error::LinAlg(format!("singular values failed: {e:?}")))?;
    Ok(Array1::from_vec(v))
}
