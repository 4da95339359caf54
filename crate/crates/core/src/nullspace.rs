//! Steps 2 and 3: characteristic coefficients from the null space of the
//! shifted Hankel matrix, by ordinary then weighted least squares.
//!
//! By Cayley-Hamilton the reversed coefficient row `ar = [a_nx, ..., a_1]`
//! annihilates the stacked Hankel matrix of the predictor Markov parameters:
//! `ar H+ + H- = 0`, where `H+` holds the first `n_x` Hankel rows and `H-`
//! the last one. With estimated Markov parameters the residual satisfies
//! `[ar 1] (H_hat - H) = (g_hat - g) T(ar)` for a banded Toeplitz `T`, so the
//! asymptotically optimal weighting is `Lambda = T' R_n^{-1} T` (the
//! innovation-variance factor scales the objective uniformly and is dropped).
//!
//! Public `alpha` vectors are always in natural order `[a_1, ..., a_nx]`;
//! the reversal is internal to the solvers.

use nalgebra::{Cholesky, DMatrix, Dyn, RowDVector};

use crate::error::{invalid, Error, Result};
use crate::hoar::{MarkovEstimate, CONDITION_LIMIT};
use crate::linalg;

/// WLS iterations stop early once the coefficient update falls below this.
pub const WLS_CONVERGENCE_TOL: f64 = 1e-10;

/// Split Hankel matrix of Markov parameters.
#[derive(Debug, Clone)]
pub struct HankelPair {
    /// First `n_x` Hankel rows (`n_x` x `p`).
    pub h_plus: DMatrix<f64>,
    /// Last Hankel row (1 x `p`).
    pub h_minus: RowDVector<f64>,
    pub n_x: usize,
    /// Column count `p = n - n_x`.
    pub p: usize,
}

impl HankelPair {
    /// All `n_x + 1` Hankel rows stacked (used for rank diagnostics).
    pub fn stacked(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_x + 1, self.p);
        m.rows_mut(0, self.n_x).copy_from(&self.h_plus);
        m.row_mut(self.n_x).copy_from(&self.h_minus);
        m
    }
}

/// Build the split Hankel matrix; entry `(i, j)` is `g[i + j]`.
pub fn build_hankel(g: &[f64], n_x: usize) -> Result<HankelPair> {
    let n = g.len();
    if n_x == 0 {
        return invalid("n_x must be >= 1");
    }
    if n < 2 * n_x + 1 {
        return invalid(format!(
            "need at least {} Markov parameters for n_x = {n_x} (got {n})",
            2 * n_x + 1
        ));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return invalid("Markov parameters must be finite");
    }
    let p = n - n_x;
    let h_plus = DMatrix::from_fn(n_x, p, |i, j| g[i + j]);
    let h_minus = RowDVector::from_fn(p, |_, j| g[n_x + j]);
    Ok(HankelPair {
        h_plus,
        h_minus,
        n_x,
        p,
    })
}

/// Which solve produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ols,
    /// Weighted stage, with the number of reweighting iterations performed.
    Wls { iterations: usize },
}

/// Characteristic-coefficient estimate from a null-space solve.
#[derive(Debug, Clone)]
pub struct NullSpaceEstimate {
    /// Natural-order coefficients `[a_1, ..., a_nx]`.
    pub alpha: Vec<f64>,
    pub stage: Stage,
    /// Condition estimate of the (weighted) solve; for the OLS stage this is
    /// the unweighted normal-matrix condition.
    pub weighting_condition: f64,
    /// True when the weighting had to fall back to identity.
    pub degraded: bool,
}

/// Ordinary least-squares null-space fit.
pub fn estimate_alpha_ols(h: &HankelPair) -> Result<NullSpaceEstimate> {
    let design = h.h_plus.transpose();
    let rhs = DMatrix::from_column_slice(h.p, 1, (-&h.h_minus).transpose().as_slice());
    let (sol, cond) = linalg::lstsq_mat(&design, &rhs)?;
    let condition = cond * cond;
    if condition > CONDITION_LIMIT {
        return Err(Error::IllConditioned {
            context: "null-space normal matrix (is the true order below n_x?)",
            condition,
        });
    }
    let alpha = unreverse(sol.column(0).as_slice());
    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite {
            context: "null-space fit",
            iteration: 0,
        });
    }
    Ok(NullSpaceEstimate {
        alpha,
        stage: Stage::Ols,
        weighting_condition: condition,
        degraded: false,
    })
}

/// Banded Toeplitz `T` (`n` x `n - n_x`) mapping a Markov-parameter
/// perturbation row to the null-space residual row: column `j` carries
/// `[a_nx, ..., a_1, 1]` starting at row `j`.
pub fn alpha_band_toeplitz(alpha: &[f64], n: usize) -> Result<DMatrix<f64>> {
    let n_x = alpha.len();
    if n_x == 0 || n < n_x + 1 {
        return invalid(format!(
            "band matrix needs n >= n_x + 1 (got n = {n}, n_x = {n_x})"
        ));
    }
    let p = n - n_x;
    let mut t = DMatrix::zeros(n, p);
    for j in 0..p {
        for (d, &a) in alpha.iter().rev().enumerate() {
            t[(j + d, j)] = a;
        }
        t[(j + n_x, j)] = 1.0;
    }
    Ok(t)
}

/// Weighting operator `Lambda^{-1}` held in factored form; never inverted
/// explicitly.
pub struct Weighting {
    chol: Option<Cholesky<f64, Dyn>>,
    /// Condition estimate of `Lambda` (squared diagonal ratio of its factor);
    /// infinite when the identity fallback engaged.
    pub condition: f64,
    /// True when every factorization attempt failed and the weighting is the
    /// identity.
    pub degraded: bool,
}

impl Weighting {
    /// Build `Lambda = T(alpha)' R_n^{-1} T(alpha)` from a pre-fit.
    pub fn build(alpha: &[f64], markov: &MarkovEstimate) -> Result<Self> {
        let r_chol = factor_r(markov)?;
        Self::with_r_factor(alpha, &r_chol, markov.order)
    }

    fn with_r_factor(alpha: &[f64], r_chol: &Cholesky<f64, Dyn>, n: usize) -> Result<Self> {
        let t = alpha_band_toeplitz(alpha, n)?;
        // Lambda = (L^-1 T)' (L^-1 T) with R_n = L L'.
        let white = r_chol
            .l()
            .solve_lower_triangular(&t)
            .ok_or(Error::Singular {
                context: "whitening by the regressor second-moment factor",
            })?;
        let lambda = linalg::gram(&white);
        let (chol, degraded) = cholesky_with_jitter(lambda);
        let condition = match &chol {
            Some(c) => {
                let d = c.l_dirty();
                let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
                for i in 0..d.nrows() {
                    lo = lo.min(d[(i, i)].abs());
                    hi = hi.max(d[(i, i)].abs());
                }
                (hi / lo).powi(2)
            }
            None => f64::INFINITY,
        };
        Ok(Self {
            chol,
            condition,
            degraded,
        })
    }

    /// Reconstruct the weighting matrix (identity under the fallback).
    /// Diagnostic/test helper; solves go through [`Weighting::whiten`].
    pub fn matrix(&self, p: usize) -> DMatrix<f64> {
        match &self.chol {
            Some(c) => {
                let l = c.l();
                &l * l.transpose()
            }
            None => DMatrix::identity(p, p),
        }
    }

    /// Apply `L^-1` (with `Lambda = L L'`) to a matrix, so that squared norms
    /// of whitened vectors are `Lambda^{-1}` quadratic forms.
    pub fn whiten(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match &self.chol {
            Some(c) => c
                .l()
                .solve_lower_triangular(m)
                .ok_or(Error::Singular {
                    context: "weighting factor solve",
                }),
            None => Ok(m.clone()),
        }
    }
}

fn factor_r(markov: &MarkovEstimate) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(markov.r_n.clone()).ok_or(Error::IllConditioned {
        context: "regressor second-moment matrix is not positive definite",
        condition: f64::INFINITY,
    })
}

/// Cholesky with escalating diagonal jitter (`1e-12 trace/p`, then x10, x100)
/// and an identity fallback flagged as degraded.
pub(crate) fn cholesky_with_jitter(m: DMatrix<f64>) -> (Option<Cholesky<f64, Dyn>>, bool) {
    if let Some(c) = Cholesky::new(m.clone()) {
        return (Some(c), false);
    }
    let p = m.nrows();
    let base = 1e-12 * m.trace() / p as f64;
    if base.is_finite() && base > 0.0 {
        for scale in [1.0, 10.0, 100.0] {
            let mut jittered = m.clone();
            for i in 0..p {
                jittered[(i, i)] += base * scale;
            }
            if let Some(c) = Cholesky::new(jittered) {
                return (Some(c), false);
            }
        }
    }
    (None, true)
}

/// Weighted null-space fit, reweighting `iterations` times starting from
/// `prior` (typically the OLS stage output).
pub fn estimate_alpha_wls(
    h: &HankelPair,
    prior: &[f64],
    markov: &MarkovEstimate,
    iterations: usize,
) -> Result<NullSpaceEstimate> {
    if iterations == 0 {
        return invalid("WLS needs at least one iteration");
    }
    if prior.len() != h.n_x {
        return invalid(format!(
            "prior has length {}, expected n_x = {}",
            prior.len(),
            h.n_x
        ));
    }
    if markov.order != h.n_x + h.p {
        return invalid(format!(
            "pre-fit order {} does not match Hankel size n_x + p = {}",
            markov.order,
            h.n_x + h.p
        ));
    }
    let r_chol = factor_r(markov)?;

    let design_t = h.h_plus.transpose();
    let rhs_t = DMatrix::from_column_slice(h.p, 1, (-&h.h_minus).transpose().as_slice());

    let mut alpha = prior.to_vec();
    let mut condition = f64::NAN;
    let mut degraded = false;
    let mut performed = 0;
    for it in 1..=iterations {
        let w = Weighting::with_r_factor(&alpha, &r_chol, markov.order)?;
        degraded |= w.degraded;
        condition = w.condition;
        let design = w.whiten(&design_t)?;
        let rhs = w.whiten(&rhs_t)?;
        let (sol, _) = linalg::lstsq_mat(&design, &rhs)?;
        let next = unreverse(sol.column(0).as_slice());
        if next.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite {
                context: "weighted null-space fit",
                iteration: it,
            });
        }
        let step = alpha
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        alpha = next;
        performed = it;
        if step < WLS_CONVERGENCE_TOL {
            break;
        }
    }
    Ok(NullSpaceEstimate {
        alpha,
        stage: Stage::Wls {
            iterations: performed,
        },
        weighting_condition: condition,
        degraded,
    })
}

/// Reversed solver layout back to natural order.
fn unreverse(rev: &[f64]) -> Vec<f64> {
    rev.iter().rev().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StateSpaceModel;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference_model() -> StateSpaceModel {
        StateSpaceModel::observer_canonical(&[0.9], &[1.7], 1.0).unwrap()
    }

    fn identity_markov(g: Vec<f64>) -> MarkovEstimate {
        let n = g.len();
        MarkovEstimate::from_parts(g, DMatrix::identity(n, n), 100, 1.0).unwrap()
    }

    #[test]
    fn hankel_of_reference_markov_parameters() {
        let g = reference_model().markov_parameters(3).unwrap();
        let h = build_hankel(&g, 1).unwrap();
        assert_eq!(h.p, 2);
        assert_relative_eq!(h.h_plus[(0, 0)], 1.7);
        assert_relative_eq!(h.h_plus[(0, 1)], -1.53);
        assert_relative_eq!(h.h_minus[0], -1.53);
        assert_relative_eq!(h.h_minus[1], 1.377);
    }

    #[test]
    fn hankel_index_bookkeeping() {
        let h = build_hankel(&[1.0, 2.0, 3.0, 4.0, 5.0], 2).unwrap();
        assert_eq!(h.p, 3);
        let expected_plus = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 3.0, 4.0]);
        assert_eq!(h.h_plus, expected_plus);
        assert_eq!(h.h_minus.as_slice(), &[3.0, 4.0, 5.0]);

        let zeros = build_hankel(&[0.0; 5], 2).unwrap();
        assert!(zeros.stacked().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hankel_rejects_short_inputs() {
        let err = build_hankel(&[1.0, 2.0], 1).unwrap_err();
        assert!(err.to_string().contains('3'), "should name the minimum: {err}");
    }

    #[test]
    fn ols_recovers_scalar_coefficients_from_exact_data() {
        let g = reference_model().markov_parameters(21).unwrap();
        let h = build_hankel(&g, 1).unwrap();
        let est = estimate_alpha_ols(&h).unwrap();
        assert_eq!(est.stage, Stage::Ols);
        assert_relative_eq!(est.alpha[0], 0.9, epsilon = 1e-12);
    }

    #[test]
    fn ols_recovers_two_state_coefficients_from_exact_data() {
        let model = StateSpaceModel::observer_canonical(&[-1.3, 0.4], &[1.0, 0.0], 1.0).unwrap();
        let g = model.markov_parameters(21).unwrap();
        let h = build_hankel(&g, 2).unwrap();
        let est = estimate_alpha_ols(&h).unwrap();
        assert_relative_eq!(est.alpha[0], -1.3, epsilon = 1e-10);
        assert_relative_eq!(est.alpha[1], 0.4, epsilon = 1e-10);
    }

    #[test]
    fn ols_rejects_order_collapse() {
        // White noise has zero Markov parameters: H+ H+' is singular.
        let h = build_hankel(&[0.0; 7], 1).unwrap();
        match estimate_alpha_ols(&h) {
            Err(Error::Singular { .. }) | Err(Error::IllConditioned { .. }) => {}
            other => panic!("expected singularity, got {other:?}"),
        }
    }

    #[test]
    fn band_toeplitz_layout() {
        let t = alpha_band_toeplitz(&[0.9], 3).unwrap();
        let expected = DMatrix::from_row_slice(3, 2, &[0.9, 0.0, 1.0, 0.9, 0.0, 1.0]);
        assert_eq!(t, expected);

        let t = alpha_band_toeplitz(&[0.5, -0.25], 5).unwrap();
        assert_eq!(t.shape(), (5, 3));
        // Column 0: [a2, a1, 1, 0, 0]
        assert_eq!(t.column(0).as_slice(), &[-0.25, 0.5, 1.0, 0.0, 0.0]);
        assert!(alpha_band_toeplitz(&[0.5], 1).is_err());
    }

    #[test]
    fn weighting_matrix_under_identity_second_moment() {
        let markov = identity_markov(vec![0.4, 0.2, 0.1]);
        let w = Weighting::build(&[0.9], &markov).unwrap();
        assert!(!w.degraded);
        let lambda = w.matrix(2);
        let expected = DMatrix::from_row_slice(2, 2, &[1.81, 0.9, 0.9, 1.81]);
        for (a, b) in lambda.iter().zip(expected.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_alpha_weighting_is_identity() {
        let markov = identity_markov(vec![0.4, 0.2, 0.1, 0.05]);
        let w = Weighting::build(&[0.0], &markov).unwrap();
        let lambda = w.matrix(3);
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(lambda[(i, j)], if i == j { 1.0 } else { 0.0 }, epsilon = 1e-14);
            }
        }
        assert_relative_eq!(w.condition, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn jitter_rescues_semidefinite_weighting() {
        // Rank-one PSD matrix: plain Cholesky fails, jitter succeeds.
        let v = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let m = &v * v.transpose();
        let (chol, degraded) = cholesky_with_jitter(m);
        assert!(chol.is_some());
        assert!(!degraded);
        // A hopeless input falls back to identity.
        let bad = DMatrix::from_row_slice(2, 2, &[f64::NAN, 0.0, 0.0, 1.0]);
        let (chol, degraded) = cholesky_with_jitter(bad);
        assert!(chol.is_none());
        assert!(degraded);
    }

    #[test]
    fn first_wls_iterate_with_identity_weighting_equals_ols() {
        let g = reference_model().markov_parameters(12).unwrap();
        let h = build_hankel(&g, 1).unwrap();
        let markov = identity_markov(g);
        let ols = estimate_alpha_ols(&h).unwrap();
        let wls = estimate_alpha_wls(&h, &[0.0], &markov, 1).unwrap();
        assert_relative_eq!(wls.alpha[0], ols.alpha[0], epsilon = 1e-12);
        assert_eq!(wls.stage, Stage::Wls { iterations: 1 });
        assert!(!wls.degraded);
    }

    #[test]
    fn wls_is_a_fixed_point_on_exact_data() {
        let model = StateSpaceModel::observer_canonical(&[-1.3, 0.4], &[1.0, 0.5], 1.0).unwrap();
        let g = model.markov_parameters(15).unwrap();
        let h = build_hankel(&g, 2).unwrap();
        let markov = identity_markov(g);
        let prior = estimate_alpha_ols(&h).unwrap();
        let est = estimate_alpha_wls(&h, &prior.alpha, &markov, 5).unwrap();
        assert_relative_eq!(est.alpha[0], -1.3, epsilon = 1e-10);
        assert_relative_eq!(est.alpha[1], 0.4, epsilon = 1e-10);
        // The update converges immediately on exact data.
        assert!(matches!(est.stage, Stage::Wls { iterations } if iterations <= 2));
    }

    #[test]
    fn wls_validates_arguments() {
        let g = reference_model().markov_parameters(9).unwrap();
        let h = build_hankel(&g, 1).unwrap();
        let markov = identity_markov(g.clone());
        assert!(estimate_alpha_wls(&h, &[0.0], &markov, 0).is_err());
        assert!(estimate_alpha_wls(&h, &[0.0, 0.0], &markov, 1).is_err());
        let wrong_order = identity_markov(g[..7].to_vec());
        assert!(estimate_alpha_wls(&h, &[0.0], &wrong_order, 1).is_err());
    }

    proptest! {
        /// Residual rewriting identity: [ar 1] H(dg) = dg T(alpha) for any
        /// coefficients and any perturbation vector.
        #[test]
        fn hankel_residual_factors_through_band_matrix(
            alpha in proptest::collection::vec(-2.0f64..2.0, 1..4),
            dg in proptest::collection::vec(-5.0f64..5.0, 9..20),
        ) {
            let n_x = alpha.len();
            prop_assume!(dg.len() > 2 * n_x);
            let n = dg.len();
            let h = build_hankel(&dg, n_x).unwrap();
            let t = alpha_band_toeplitz(&alpha, n).unwrap();

            let mut reversed_row = RowDVector::zeros(n_x + 1);
            for (i, &a) in alpha.iter().rev().enumerate() {
                reversed_row[i] = a;
            }
            reversed_row[n_x] = 1.0;
            let lhs = reversed_row * h.stacked();
            let rhs = RowDVector::from_row_slice(&dg) * t;
            for j in 0..h.p {
                prop_assert!((lhs[j] - rhs[j]).abs() < 1e-13 * (1.0 + rhs[j].abs()));
            }
        }

        /// The reversed coefficient row annihilates exact Hankel data.
        #[test]
        fn exact_markov_parameters_lie_in_the_null_space(
            seed_alpha in proptest::collection::vec(-0.9f64..0.9, 1..4),
            k in proptest::collection::vec(-1.5f64..1.5, 4),
        ) {
            // Scale alpha until the companion matrix is comfortably stable.
            let mut alpha = seed_alpha;
            while crate::poly::spectral_radius(&alpha).unwrap() >= 0.98 {
                for a in alpha.iter_mut() {
                    *a *= 0.5;
                }
            }
            let n_x = alpha.len();
            let model = StateSpaceModel::observer_canonical(&alpha, &k[..n_x], 1.0).unwrap();
            let g = model.markov_parameters(2 * n_x + 6).unwrap();
            let h = build_hankel(&g, n_x).unwrap();

            let mut reversed_row = RowDVector::zeros(n_x + 1);
            for (i, &a) in alpha.iter().rev().enumerate() {
                reversed_row[i] = a;
            }
            reversed_row[n_x] = 1.0;
            let resid = reversed_row * h.stacked();
            let scale = 1.0 + h.stacked().amax();
            for j in 0..h.p {
                prop_assert!(resid[j].abs() < 1e-10 * scale);
            }
        }
    }
}
