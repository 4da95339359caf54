//! Step 1: high-order autoregressive pre-fit.
//!
//! Regressing `y_k` on the `n` previous samples recovers the predictor Markov
//! parameters: `g_hat = argmin sum_k (y_k - g' y_n(k))^2` with regressor
//! `y_n(k) = [y_{k-1}, ..., y_{k-n}]'`. The normalized regressor second
//! moment `R_n` and the residual variance drive the later weighting stage.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::linalg;

/// Condition threshold above which the normal matrix is rejected.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Result of the autoregressive pre-fit.
#[derive(Debug, Clone)]
pub struct MarkovEstimate {
    /// Estimated predictor Markov parameters, length `order`.
    pub g_hat: DVector<f64>,
    /// Normalized regressor second-moment matrix (`order` x `order`).
    pub r_n: DMatrix<f64>,
    /// Autoregression order `n`.
    pub order: usize,
    /// Effective sample count `N = n_samples - order + 1` used for all
    /// normalizations (one more than the number of regression rows; the
    /// convention keeps the asymptotic bookkeeping of the covariance
    /// `sigma2 R_n^{-1} / N`).
    pub n_eff: usize,
    /// Residual variance estimate with denominator `N`.
    pub sigma2_hat: f64,
    /// Condition estimate of `R_n`.
    pub condition: f64,
}

impl MarkovEstimate {
    /// Assemble an estimate from precomputed parts (used for exact-data
    /// pipelines and tests; `estimate_hoar` is the data path).
    pub fn from_parts(
        g_hat: Vec<f64>,
        r_n: DMatrix<f64>,
        n_eff: usize,
        sigma2_hat: f64,
    ) -> Result<Self> {
        let order = g_hat.len();
        if order == 0 {
            return invalid("g_hat must be non-empty");
        }
        if r_n.shape() != (order, order) {
            return invalid(format!(
                "r_n must be {order}x{order}, got {}x{}",
                r_n.nrows(),
                r_n.ncols()
            ));
        }
        if n_eff == 0 || !(sigma2_hat > 0.0) {
            return invalid("n_eff and sigma2_hat must be positive");
        }
        Ok(Self {
            g_hat: DVector::from_vec(g_hat),
            r_n,
            order,
            n_eff,
            sigma2_hat,
            condition: 1.0,
        })
    }
}

/// Ordinary least-squares autoregressive fit of order `n`.
pub fn estimate_hoar(y: &[f64], n: usize) -> Result<MarkovEstimate> {
    fit(y, n, 0.0)
}

/// Ridge-regularized variant (`ridge > 0` adds `sqrt(ridge)`-scaled identity
/// rows to the regressor). Off the default path; the condition threshold is
/// skipped because the augmented system is regular by construction, and
/// callers must surface the setting in diagnostics.
pub fn estimate_hoar_ridge(y: &[f64], n: usize, ridge: f64) -> Result<MarkovEstimate> {
    if !(ridge > 0.0) || !ridge.is_finite() {
        return invalid(format!("ridge must be positive and finite (got {ridge})"));
    }
    fit(y, n, ridge)
}

fn fit(y: &[f64], n: usize, ridge: f64) -> Result<MarkovEstimate> {
    let n_bar = y.len();
    if n == 0 {
        return invalid("autoregression order must be >= 1");
    }
    if 2 * n >= n_bar {
        return invalid(format!(
            "autoregression order {n} too large for {n_bar} samples (need n < n_samples/2)"
        ));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return invalid("trajectory contains non-finite samples");
    }

    let rows = n_bar - n;
    let n_eff = n_bar - n + 1;

    // Regressor row for target y[k]: the n samples preceding it, newest first.
    let phi = DMatrix::from_fn(rows, n, |r, j| y[n + r - 1 - j]);
    let target = DVector::from_fn(rows, |r, _| y[n + r]);

    // Second-moment matrix of the regressor; under a ridge it is the
    // regularized matrix that the estimator actually inverted, which keeps it
    // factorizable for the downstream weighting.
    let mut r_n = linalg::gram(&phi);
    if ridge > 0.0 {
        for i in 0..n {
            r_n[(i, i)] += ridge;
        }
    }
    r_n /= n_eff as f64;

    let (g_hat, cond_phi) = if ridge > 0.0 {
        let mut aug = DMatrix::zeros(rows + n, n);
        aug.rows_mut(0, rows).copy_from(&phi);
        let s = ridge.sqrt();
        for i in 0..n {
            aug[(rows + i, i)] = s;
        }
        let mut tgt = DVector::zeros(rows + n);
        tgt.rows_mut(0, rows).copy_from(&target);
        linalg::lstsq(&aug, &tgt)?
    } else {
        linalg::lstsq(&phi, &target)?
    };

    // cond(R_n) ~ cond(phi)^2.
    let condition = cond_phi * cond_phi;
    if ridge == 0.0 && condition > CONDITION_LIMIT {
        return Err(Error::IllConditioned {
            context: "autoregressive normal matrix",
            condition,
        });
    }

    let resid = &target - &phi * &g_hat;
    let sigma2_hat = resid.norm_squared() / n_eff as f64;

    Ok(MarkovEstimate {
        g_hat,
        r_n,
        order: n,
        n_eff,
        sigma2_hat,
        condition,
    })
}

/// Default autoregression order for a given sample count:
/// `min(max(ceil(5 n^0.35), 20), n/10)`, growing slowly with the data while
/// keeping the regression comfortably overdetermined.
pub fn default_order(n_samples: usize) -> Result<usize> {
    if n_samples < 100 {
        return invalid(format!(
            "default_order needs n_samples >= 100 (got {n_samples})"
        ));
    }
    let raw = (5.0 * (n_samples as f64).powf(0.35)).ceil() as usize;
    Ok(raw.max(20).min(n_samples / 10))
}
