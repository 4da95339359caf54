//! Dense least-squares helpers used by every estimation stage.
//!
//! All solves go through factorizations (Householder QR, Cholesky); no
//! explicit inverse is ever formed. Condition numbers are cheap estimates
//! from factor diagonals, adequate for thresholding and diagnostics.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

/// Least squares `argmin_x |a x - b|` for a tall matrix via Householder QR.
///
/// Returns the solution together with a condition estimate of `a` (ratio of
/// extreme diagonal magnitudes of the triangular factor, a lower bound on the
/// true condition number).
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let (x, cond) = lstsq_mat(a, &DMatrix::from_column_slice(b.len(), 1, b.as_slice()))?;
    Ok((DVector::from_column_slice(x.column(0).as_slice()), cond))
}

/// Multi-right-hand-side variant of [`lstsq`].
pub fn lstsq_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let (m, n) = a.shape();
    if m < n {
        return invalid(format!(
            "least squares needs at least as many rows as columns (got {m}x{n})"
        ));
    }
    if b.nrows() != m {
        return invalid(format!(
            "right-hand side has {} rows, expected {m}",
            b.nrows()
        ));
    }
    let qr = a.clone().qr();
    let mut qtb = b.clone();
    qr.q_tr_mul(&mut qtb);
    let r = qr.r();
    let cond = triangular_condition(&r)?;
    let x = r
        .solve_upper_triangular(&qtb.rows(0, n).into_owned())
        .ok_or(Error::Singular {
            context: "least-squares triangular back-substitution",
        })?;
    Ok((x, cond))
}

/// Condition estimate from the diagonal of a triangular factor. Diagonal
/// entries at roundoff level relative to the largest (rank deficiency that
/// finite precision turned into a tiny pivot) count as singular.
fn triangular_condition(r: &DMatrix<f64>) -> Result<f64> {
    let k = r.nrows().min(r.ncols());
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for i in 0..k {
        let d = r[(i, i)].abs();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if lo <= hi * f64::EPSILON * k as f64 || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Singular {
            context: "rank-deficient least-squares factorization",
        });
    }
    Ok(hi / lo)
}

/// `m' * m` with the upper triangle computed once and mirrored, so the result
/// is symmetric to the last bit.
pub fn gram(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.ncols();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = m.column(i).dot(&m.column(j));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}
