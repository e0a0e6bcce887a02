//! Dense linear-algebra helpers on top of `faer`.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};

use crate::{Error, Result, C64};

pub fn frobenius_norm(m: &Mat<C64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

pub fn vector_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigenvalues and right eigenvectors (as columns) of a general complex
/// matrix.
pub fn eigen(m: &Mat<C64>) -> Result<(Vec<C64>, Mat<C64>)> {
    let evd = m.eigen().map_err(|_| Error::EigenFailure)?;
    let values = evd.S().column_vector().iter().copied().collect();
    Ok((values, evd.U().to_owned()))
}

pub fn eigenvalues(m: &Mat<C64>) -> Result<Vec<C64>> {
    m.eigenvalues().map_err(|_| Error::EigenFailure)
}

/// Eigenvalues of a Hermitian matrix in nondecreasing order. Only the lower
/// triangle is read.
pub fn hermitian_eigenvalues(m: &Mat<C64>) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::EigenFailure)
}

pub fn real_symmetric_eigenvalues(m: &Mat<f64>) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::EigenFailure)
}

pub fn singular_values(m: &Mat<C64>) -> Result<Vec<f64>> {
    m.singular_values().map_err(|_| Error::EigenFailure)
}

/// Solves `m x = rhs` by LU with partial pivoting.
pub fn solve(m: &Mat<C64>, rhs: &Mat<C64>) -> Mat<C64> {
    m.partial_piv_lu().solve(rhs)
}

pub fn column(v: &[C64]) -> Mat<C64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

pub fn mat_vec(m: &Mat<C64>, v: &[C64]) -> Vec<C64> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum()).collect()
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
///
/// The argument is scaled until its 1-norm is below 1/2, where 24 Taylor
/// terms are accurate far beyond double precision.
pub fn expm(m: &Mat<C64>) -> Mat<C64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    let norm1 = (0..n).map(|j| (0..n).map(|i| m[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max);
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm1 * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = Mat::from_fn(n, n, |i, j| m[(i, j)] * scale);
    let mut result = Mat::<C64>::identity(n, n);
    let mut term = Mat::<C64>::identity(n, n);
    for k in 1..=24 {
        term = &term * &a;
        let inv_k = 1.0 / k as f64;
        term = Mat::from_fn(n, n, |i, j| term[(i, j)] * inv_k);
        result = &result + &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}
