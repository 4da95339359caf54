//! Monic-polynomial helpers: companion matrices, root solving and
//! characteristic coefficients.
//!
//! A coefficient slice `[c1, ..., cn]` always stands for the monic polynomial
//! `z^n + c1 z^(n-1) + ... + cn`.

use nalgebra::{Complex, DMatrix};

use crate::error::{invalid, Result};

/// Companion matrix in observer layout: coefficients (negated) down the first
/// column, ones on the superdiagonal. Its characteristic polynomial is the
/// monic polynomial of `coeffs`.
pub fn companion(coeffs: &[f64]) -> DMatrix<f64> {
    let n = coeffs.len();
    let mut m = DMatrix::zeros(n, n);
    for (i, &c) in coeffs.iter().enumerate() {
        m[(i, 0)] = -c;
        if i + 1 < n {
            m[(i, i + 1)] = 1.0;
        }
    }
    m
}

/// Roots of the monic polynomial via an eigensolve of its companion matrix.
pub fn roots(coeffs: &[f64]) -> Result<Vec<Complex<f64>>> {
    if coeffs.is_empty() {
        return invalid("polynomial must have degree >= 1");
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return invalid("polynomial coefficients must be finite");
    }
    let mut r: Vec<Complex<f64>> = companion(coeffs)
        .complex_eigenvalues()
        .iter()
        .copied()
        .collect();
    sort_complex(&mut r);
    Ok(r)
}

/// Largest root magnitude of the monic polynomial.
pub fn spectral_radius(coeffs: &[f64]) -> Result<f64> {
    Ok(roots(coeffs)?
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// Characteristic-polynomial coefficients of a square matrix by the
/// Faddeev-LeVerrier recursion (exact in O(n^4), no complex arithmetic).
pub fn characteristic_coeffs(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if !m.is_square() || m.is_empty() {
        return invalid("characteristic coefficients need a non-empty square matrix");
    }
    let n = m.nrows();
    let mut coeffs = Vec::with_capacity(n);
    let mut work = m.clone();
    for k in 1..=n {
        let c = -work.trace() / k as f64;
        coeffs.push(c);
        if k < n {
            for i in 0..n {
                work[(i, i)] += c;
            }
            work = m * work;
        }
    }
    Ok(coeffs)
}

/// Expand a monic polynomial from its roots, discarding the (numerically
/// tiny) imaginary parts that closed conjugate pairs leave behind.
pub fn coeffs_from_roots(roots: &[Complex<f64>]) -> Vec<f64> {
    let mut poly = vec![Complex::new(1.0, 0.0)];
    for r in roots {
        poly.push(Complex::new(0.0, 0.0));
        for i in (1..poly.len()).rev() {
            let lower = poly[i - 1];
            poly[i] -= r * lower;
        }
    }
    poly.iter().skip(1).map(|c| c.re).collect()
}

/// Deterministic ordering used everywhere roots are reported: descending
/// magnitude, ties broken by real then imaginary part.
pub fn sort_complex(values: &mut [Complex<f64>]) {
    values.sort_by(|a, b| {
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.re.partial_cmp(&b.re).unwrap_or(std::cmp::Ordering::Equal))
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}
