//! SISO state-space model in observer canonical form.
//!
//! The model stores the characteristic coefficients `alpha` of the predictor
//! matrix and the gain `k_gain`; the matrices themselves are materialized on
//! demand. With `C = [1, 0, ..., 0]`,
//!
//! ```text
//! A_K = companion(alpha)          (predictor matrix, innovations form A - K C)
//! A   = A_K + K C = companion(alpha - k_gain)
//! ```
//!
//! so the entries `alpha - k_gain` are exactly the autoregressive coefficients
//! of the output process.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::poly;

/// Stability margin: spectral radii must stay below `1 - STABILITY_MARGIN`.
pub const STABILITY_MARGIN: f64 = 1e-10;

/// Immutable innovations-form model; construct via
/// [`StateSpaceModel::observer_canonical`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpaceModel {
    alpha: Vec<f64>,
    k_gain: Vec<f64>,
    sigma2_e: f64,
}

impl StateSpaceModel {
    /// Build the model from characteristic coefficients, gain and innovation
    /// variance, rejecting predictor matrices with spectral radius at or
    /// above one.
    pub fn observer_canonical(alpha: &[f64], k_gain: &[f64], sigma2_e: f64) -> Result<Self> {
        if alpha.is_empty() || alpha.len() != k_gain.len() {
            return invalid(format!(
                "alpha and k_gain must have equal positive length (got {} and {})",
                alpha.len(),
                k_gain.len()
            ));
        }
        if alpha.iter().chain(k_gain).any(|v| !v.is_finite()) {
            return invalid("model coefficients must be finite");
        }
        if !(sigma2_e > 0.0) || !sigma2_e.is_finite() {
            return invalid(format!("sigma2_e must be positive and finite (got {sigma2_e})"));
        }
        let rho = poly::spectral_radius(alpha)?;
        if rho >= 1.0 - STABILITY_MARGIN {
            return Err(Error::Unstable {
                context: "predictor matrix",
                rho,
            });
        }
        Ok(Self {
            alpha: alpha.to_vec(),
            k_gain: k_gain.to_vec(),
            sigma2_e,
        })
    }

    pub fn n_x(&self) -> usize {
        self.alpha.len()
    }

    /// Characteristic coefficients of the predictor matrix.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn k_gain(&self) -> &[f64] {
        &self.k_gain
    }

    pub fn sigma2_e(&self) -> f64 {
        self.sigma2_e
    }

    /// Autoregressive coefficients of the output process (`alpha - k_gain`).
    pub fn ar_coefficients(&self) -> Vec<f64> {
        self.alpha
            .iter()
            .zip(&self.k_gain)
            .map(|(a, k)| a - k)
            .collect()
    }

    /// Materialize the predictor matrix (companion of `alpha`).
    pub fn a_k(&self) -> DMatrix<f64> {
        poly::companion(&self.alpha)
    }

    /// Materialize the state matrix `A = A_K + K C`.
    pub fn a(&self) -> DMatrix<f64> {
        poly::companion(&self.ar_coefficients())
    }

    /// Roots of the predictor characteristic polynomial (eigenvalues of A_K).
    pub fn characteristic_roots(&self) -> PolynomialRoots {
        PolynomialRoots {
            roots: poly::roots(&self.alpha).expect("validated coefficients"),
        }
    }

    /// Poles of the output process (eigenvalues of A).
    pub fn innovation_roots(&self) -> PolynomialRoots {
        PolynomialRoots {
            roots: poly::roots(&self.ar_coefficients()).expect("validated coefficients"),
        }
    }

    /// Whether the state matrix A is stable; simulation requires this, model
    /// construction deliberately does not.
    pub fn is_innovation_stable(&self) -> bool {
        self.innovation_roots().spectral_radius() < 1.0
    }

    /// Predictor Markov parameters `g_i = C A_K^{i-1} K`, i = 1..count.
    pub fn markov_parameters(&self, count: usize) -> Result<Vec<f64>> {
        if count == 0 {
            return invalid("count must be >= 1");
        }
        let mut out = Vec::with_capacity(count);
        let mut v = self.k_gain.clone();
        for _ in 0..count {
            out.push(v[0]);
            companion_mul_in_place(&self.alpha, &mut v);
        }
        Ok(out)
    }

    /// Impulse response of the noise shaping filter: `h_0 = 1`,
    /// `h_i = C A^{i-1} K`. The state matrix A is not required to be stable;
    /// callers can consult [`Self::is_innovation_stable`].
    pub fn impulse_response(&self, count: usize) -> Result<Vec<f64>> {
        if count == 0 {
            return invalid("count must be >= 1");
        }
        let ar = self.ar_coefficients();
        let mut out = Vec::with_capacity(count);
        out.push(1.0);
        let mut v = self.k_gain.clone();
        for _ in 1..count {
            out.push(v[0]);
            companion_mul_in_place(&ar, &mut v);
        }
        Ok(out)
    }
}

/// Multiply a companion matrix (coefficients `coeffs`, observer layout) into
/// `v` without materializing it: `w[i] = -c[i+1] v[0] + v[i+1]`.
pub(crate) fn companion_mul_in_place(coeffs: &[f64], v: &mut [f64]) {
    let n = coeffs.len();
    let v0 = v[0];
    for i in 0..n {
        v[i] = -coeffs[i] * v0 + if i + 1 < n { v[i + 1] } else { 0.0 };
    }
}

/// Root multiset of a characteristic polynomial, in the deterministic order
/// of [`poly::sort_complex`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialRoots {
    pub roots: Vec<Complex<f64>>,
}

impl PolynomialRoots {
    pub fn spectral_radius(&self) -> f64 {
        self.roots.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}
