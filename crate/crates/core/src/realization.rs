//! Step 4: gain recovery and model assembly.
//!
//! With the characteristic coefficients fixed, the one-step predictor is
//! linear in the gain: filtering the output through each unit-gain channel of
//! the predictor yields a regressor `Xi` with `y_hat_k = Xi_k K`, so `K` is a
//! single least-squares solve away.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::hoar::CONDITION_LIMIT;
use crate::linalg;
use crate::model::{companion_mul_in_place, StateSpaceModel, STABILITY_MARGIN};
use crate::poly;

/// Predictor regressor: row `k` holds the response at time `k` of the `n_x`
/// gain channels, so it depends on `y_0..y_{k-1}` only (row 0 is zero).
#[derive(Debug, Clone)]
pub struct PredictorRegressor {
    pub xi: DMatrix<f64>,
    /// Coefficients the regressor was built with.
    pub alpha: Vec<f64>,
}

/// Filter the output through the estimated predictor channels:
/// `s_{k+1} = A_K(alpha) s_k + e_j y_k` per channel `j`, `Xi_k[j] = s_k[0]`.
pub fn build_predictor_regressor(alpha_hat: &[f64], y: &[f64]) -> Result<PredictorRegressor> {
    let n_x = alpha_hat.len();
    if n_x == 0 {
        return invalid("alpha_hat must be non-empty");
    }
    if y.len() <= n_x {
        return invalid(format!(
            "need more than n_x = {n_x} samples to build the predictor regressor"
        ));
    }
    let rho = poly::spectral_radius(alpha_hat)?;
    if rho >= 1.0 - STABILITY_MARGIN {
        return Err(Error::UnstableEstimate { rho });
    }

    // One state column per gain channel; advance all channels jointly.
    let mut state = vec![vec![0.0; n_x]; n_x];
    let mut xi = DMatrix::zeros(y.len(), n_x);
    for (k, &yk) in y.iter().enumerate() {
        for (j, col) in state.iter_mut().enumerate() {
            xi[(k, j)] = col[0];
            companion_mul_in_place(alpha_hat, col);
            col[j] += yk;
        }
    }
    Ok(PredictorRegressor {
        xi,
        alpha: alpha_hat.to_vec(),
    })
}

/// Least-squares gain from the predictor regressor; returns the gain and the
/// condition estimate of the solve.
pub fn estimate_k_gain(reg: &PredictorRegressor, y: &[f64]) -> Result<(Vec<f64>, f64)> {
    if y.len() != reg.xi.nrows() {
        return invalid(format!(
            "target length {} does not match regressor rows {}",
            y.len(),
            reg.xi.nrows()
        ));
    }
    let target = nalgebra::DVector::from_column_slice(y);
    let (k, cond) = linalg::lstsq(&reg.xi, &target)?;
    let condition = cond * cond;
    if condition > CONDITION_LIMIT {
        return Err(Error::IllConditioned {
            context: "predictor-regressor normal matrix",
            condition,
        });
    }
    Ok((k.iter().copied().collect(), condition))
}

/// Assemble the estimated model; also exposes the state matrix via
/// [`StateSpaceModel::a`].
pub fn assemble_model(
    alpha_hat: &[f64],
    k_hat: &[f64],
    sigma2_hat: f64,
) -> Result<StateSpaceModel> {
    StateSpaceModel::observer_canonical(alpha_hat, k_hat, sigma2_hat)
}
