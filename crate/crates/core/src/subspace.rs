//! Subspace baseline: canonical-variate analysis of past and future output
//! windows, SVD truncation to the requested state order, then
//! shift-invariance and innovation regressions for the matrices.
//!
//! The estimate is returned in the same observer canonical form as the
//! null-space fit so the two methods are directly comparable.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::model::{StateSpaceModel, STABILITY_MARGIN};
use crate::poly;

/// Weighting applied to the past-to-future map before truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubspaceWeighting {
    /// Whiten by the Cholesky factors of the future- and past-block
    /// covariances (canonical-variate analysis); the default. The singular
    /// values become canonical correlations, which supports a calibrated
    /// noise-floor test.
    CvaLike,
    /// Plain truncation of the unweighted least-squares regression of future
    /// on past.
    Unweighted,
}

/// Horizons and weighting for [`sim_identify`].
#[derive(Debug, Clone)]
pub struct SubspaceConfig {
    /// Future-block rows; `None` picks `max(2 n_x, 10)`.
    pub f: Option<usize>,
    /// Past-block rows; `None` picks `max(2 n_x, 10)`.
    pub p: Option<usize>,
    pub weighting: SubspaceWeighting,
}

impl Default for SubspaceConfig {
    fn default() -> Self {
        Self {
            f: None,
            p: None,
            weighting: SubspaceWeighting::CvaLike,
        }
    }
}

/// Subspace estimate with the rank diagnostics that drove the truncation.
#[derive(Debug, Clone)]
pub struct SubspaceEstimate {
    pub model: StateSpaceModel,
    /// Singular values of the weighted past-to-future map; under
    /// [`SubspaceWeighting::CvaLike`] these are the canonical correlations
    /// between past and future windows (descending, in [0, 1]).
    pub singular_values: Vec<f64>,
    /// Resolved horizons.
    pub f: usize,
    pub p: usize,
}

/// Identify an `n_x`-state model by canonical-variate subspace regression.
///
/// Fails with [`Error::DegenerateOrder`] when the data cannot support the
/// requested order: either the weighted map is numerically rank deficient
/// below `n_x`, or (under the default weighting) the `n_x`-th canonical
/// correlation sits below the white-noise floor
/// `(sqrt(f) + sqrt(p) + 3) / sqrt(m)`.
pub fn sim_identify(y: &[f64], n_x: usize, cfg: &SubspaceConfig) -> Result<SubspaceEstimate> {
    if n_x == 0 {
        return invalid("model order n_x must be >= 1");
    }
    if y.iter().any(|v| !v.is_finite()) {
        return invalid("samples must be finite");
    }
    let f = cfg.f.unwrap_or_else(|| (2 * n_x).max(10));
    let p = cfg.p.unwrap_or_else(|| (2 * n_x).max(10));
    if f < n_x + 1 {
        return invalid(format!(
            "future horizon f = {f} must exceed n_x = {n_x} (shift invariance needs f >= n_x + 1)"
        ));
    }
    if p < n_x {
        return invalid(format!("past horizon p = {p} must be at least n_x = {n_x}"));
    }
    let (y_p, y_f) = block_hankels(y, f, p)?;
    let m = y_p.ncols();
    let mf = m as f64;

    // Weighted past-to-future map, its SVD, and the rank-n_x factorization
    // into observability (gamma) and state sequence.
    let (gamma, x_seq, singular_values) = match cfg.weighting {
        SubspaceWeighting::CvaLike => {
            let s_ff = linalg::gram(&y_f.transpose()) / mf;
            let s_pp = linalg::gram(&y_p.transpose()) / mf;
            let l_f = Cholesky::new(s_ff).ok_or(Error::Singular {
                context: "future-block covariance",
            })?;
            let l_p = Cholesky::new(s_pp).ok_or(Error::Singular {
                context: "past-block covariance",
            })?;
            // Doubly whitened cross-covariance L_f^{-1} S_fp L_p^{-T}: its
            // singular values are the past/future canonical correlations.
            let mut cross = (&y_f * y_p.transpose()) / mf;
            solve_lower_in_place(l_f.l_dirty(), &mut cross);
            let mut cross_t = cross.transpose();
            solve_lower_in_place(l_p.l_dirty(), &mut cross_t);
            let svd = cross_t.transpose().svd(true, true);
            let s: Vec<f64> = svd.singular_values.iter().copied().collect();
            check_rank(&s, n_x)?;
            let floor = ((f as f64).sqrt() + (p as f64).sqrt() + 3.0) / mf.sqrt();
            if s[n_x - 1] < floor {
                return Err(Error::DegenerateOrder(format!(
                    "canonical correlation {n_x} is {:.4}, below the white-noise floor {:.4}; \
                     the data do not support order n_x = {n_x}",
                    s[n_x - 1],
                    floor
                )));
            }
            let (u1, v1t, sqrt_s) = truncate(&svd, &s, n_x);
            let gamma = scale_columns(l_f.l() * u1, &sqrt_s);
            let mut white_past = y_p.clone();
            solve_lower_in_place(l_p.l_dirty(), &mut white_past);
            let x_seq = scale_rows(v1t, &sqrt_s) * white_past;
            (gamma, x_seq, s)
        }
        SubspaceWeighting::Unweighted => {
            let (gt, _) = linalg::lstsq_mat(&y_p.transpose(), &y_f.transpose())?;
            let svd = gt.transpose().svd(true, true);
            let s: Vec<f64> = svd.singular_values.iter().copied().collect();
            check_rank(&s, n_x)?;
            let (u1, v1t, sqrt_s) = truncate(&svd, &s, n_x);
            let gamma = scale_columns(u1, &sqrt_s);
            let x_seq = scale_rows(v1t, &sqrt_s) * &y_p;
            (gamma, x_seq, s)
        }
    };

    let c_row = gamma.row(0).into_owned();
    let (a_hat, _) = linalg::lstsq_mat(
        &gamma.rows(0, f - 1).into_owned(),
        &gamma.rows(1, f - 1).into_owned(),
    )?;

    // Innovations and the gain regression on the shifted states.
    let mut innovations = Vec::with_capacity(m);
    for j in 0..m {
        let pred: f64 = (0..n_x).map(|i| c_row[i] * x_seq[(i, j)]).sum();
        innovations.push(y[p + j] - pred);
    }
    let denom: f64 = innovations[..m - 1].iter().map(|e| e * e).sum();
    if denom <= f64::MIN_POSITIVE * mf {
        return Err(Error::Singular {
            context: "innovation variance",
        });
    }
    let mut k_hat = DVector::zeros(n_x);
    for j in 0..m - 1 {
        let e = innovations[j];
        for i in 0..n_x {
            let shifted = x_seq[(i, j + 1)]
                - (0..n_x).map(|l| a_hat[(i, l)] * x_seq[(l, j)]).sum::<f64>();
            k_hat[i] += shifted * e;
        }
    }
    k_hat /= denom;
    let sigma2 = innovations.iter().map(|e| e * e).sum::<f64>() / mf;

    // Convert to observer canonical form via the predictor matrix.
    let a_k = &a_hat - &k_hat * &c_row;
    let alpha = poly::characteristic_coeffs(&a_k)?;
    let rho = poly::spectral_radius(&alpha)?;
    if rho >= 1.0 - STABILITY_MARGIN {
        return Err(Error::UnstableEstimate { rho });
    }
    // Predictor Markov parameters are basis invariant; map them back to the
    // canonical gain through k_i = g_i + sum_{j<i} alpha_j g_{i-j}.
    let mut g_markov = Vec::with_capacity(n_x);
    let mut v = k_hat.clone();
    for _ in 0..n_x {
        g_markov.push(c_row.iter().zip(v.iter()).map(|(c, x)| c * x).sum::<f64>());
        v = &a_k * v;
    }
    let mut k_canon = vec![0.0; n_x];
    for i in 0..n_x {
        let mut acc = g_markov[i];
        for j in 0..i {
            acc += alpha[j] * g_markov[i - 1 - j];
        }
        k_canon[i] = acc;
    }

    let model =
        StateSpaceModel::observer_canonical(&alpha, &k_canon, sigma2.max(f64::MIN_POSITIVE))?;
    Ok(SubspaceEstimate {
        model,
        singular_values,
        f,
        p,
    })
}

fn check_rank(s: &[f64], n_x: usize) -> Result<()> {
    if s[0] <= 0.0 || s[n_x - 1] <= 1e-10 * s[0] {
        return Err(Error::DegenerateOrder(format!(
            "singular value {n_x} of the weighted map is {:.3e} (largest {:.3e}); \
             the data do not support order n_x = {n_x}",
            s[n_x - 1],
            s[0]
        )));
    }
    Ok(())
}

type Svd = nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>;

fn truncate(svd: &Svd, s: &[f64], n_x: usize) -> (DMatrix<f64>, DMatrix<f64>, Vec<f64>) {
    let u1 = svd.u.as_ref().expect("svd with u").columns(0, n_x).into_owned();
    let v1t = svd.v_t.as_ref().expect("svd with v").rows(0, n_x).into_owned();
    let sqrt_s = s.iter().take(n_x).map(|v| v.sqrt()).collect();
    (u1, v1t, sqrt_s)
}

fn scale_columns(mut m: DMatrix<f64>, scale: &[f64]) -> DMatrix<f64> {
    for (j, s) in scale.iter().enumerate() {
        m.column_mut(j).scale_mut(*s);
    }
    m
}

fn scale_rows(mut m: DMatrix<f64>, scale: &[f64]) -> DMatrix<f64> {
    for (i, s) in scale.iter().enumerate() {
        m.row_mut(i).scale_mut(*s);
    }
    m
}

/// Past/future block Hankel matrices: column `j` holds, oldest first, the
/// window `y[j] .. y[j+p-1]` (past) and `y[j+p] .. y[j+p+f-1]` (future).
fn block_hankels(y: &[f64], f: usize, p: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = y.len();
    let window = f + p;
    if n < 2 * window {
        return invalid(format!(
            "need at least 2 (f + p) = {} samples for f = {f}, p = {p} (got {n})",
            2 * window
        ));
    }
    let m = n - window + 1;
    let y_p = DMatrix::from_fn(p, m, |i, j| y[j + i]);
    let y_f = DMatrix::from_fn(f, m, |i, j| y[p + j + i]);
    Ok((y_p, y_f))
}

/// Forward substitution `L^{-1} B` in place, reading only the lower triangle
/// of `l` (tolerates an unzeroed upper part).
fn solve_lower_in_place(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    let n = l.nrows();
    for col in 0..b.ncols() {
        for i in 0..n {
            let mut acc = b[(i, col)];
            for k in 0..i {
                acc -= l[(i, k)] * b[(k, col)];
            }
            b[(i, col)] = acc / l[(i, i)];
        }
    }
}
