//! Small dense linear-algebra helpers for underdetermined n x (n+1) systems.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative threshold on the smallest singular value below which a
/// Jacobian is declared rank deficient.
pub const RANK_TOL: f64 = 1e-12;

/// Smallest and largest singular values of `m`; NaN for non-finite input,
/// which the SVD iteration would never converge on.
pub fn singular_range(m: &DMatrix<f64>) -> (f64, f64) {
    if m.iter().any(|v| !v.is_finite()) {
        return (f64::NAN, f64::NAN);
    }
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    (min, max)
}

/// Fails with [`Error::RankDeficient`] unless the wide matrix `j` has full row rank.
pub fn check_full_row_rank(j: &DMatrix<f64>) -> Result<()> {
    let (min, max) = singular_range(j);
    if !(min.is_finite() && max.is_finite()) || max == 0.0 || min < RANK_TOL * max {
        return Err(Error::RankDeficient);
    }
    Ok(())
}

/// Cofactor null vector of an n x (n+1) matrix.
///
/// Component `i` is `(-1)^i det(J with column i removed)`; the result
/// satisfies `J c = 0` and `|c|` equals the product of the singular values
/// of `J`. Unlike a normalized null vector it varies continuously along a
/// regular curve, so it carries its own orientation.
pub fn cofactor_vector(j: &DMatrix<f64>) -> DVector<f64> {
    let n = j.nrows();
    debug_assert_eq!(j.ncols(), n + 1);
    let mut c = DVector::zeros(n + 1);
    for i in 0..=n {
        let minor = j.clone().remove_column(i);
        let det = if n == 0 { 1.0 } else { minor.lu().determinant() };
        c[i] = if i % 2 == 0 { det } else { -det };
    }
    c
}

/// Minimum-norm solution of the full-row-rank system `J z = b` with `J`
/// of shape n x (n+1), via a QR factorization of `J^T`.
pub fn min_norm_solve(j: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let qr = j.transpose().qr();
    let r = qr.r();
    let rmax = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if rmax == 0.0 || r.diagonal().iter().any(|v| v.abs() < RANK_TOL * rmax) {
        return Err(Error::RankDeficient);
    }
    // J = R^T Q^T, so z = Q R^{-T} b.
    let w = r
        .transpose()
        .solve_lower_triangular(b)
        .ok_or(Error::RankDeficient)?;
    Ok(qr.q() * w)
}
