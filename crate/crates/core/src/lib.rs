//! Estimation of SISO state-space models in observer canonical form from
//! output-only time series.
//!
//! The main estimator is weighted null-space fitting: a high-order
//! autoregressive pre-fit recovers the predictor Markov parameters, the
//! characteristic coefficients are extracted from the null space of a shifted
//! Hankel matrix (ordinary, then weighted least squares), and the gain is
//! recovered by a final predictor regression. A subspace baseline, a numeric
//! Cramer-Rao bound, scoring metrics and a reproducible Monte Carlo
//! experiment runner round out the crate.

// Negated float comparisons (`!(x > 0.0)`) are NaN-rejecting guards; the
// non-negated form accepts NaN. Time-recursion loops index several sequences
// with lagged offsets, which iterator chains would obscure.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod experiment;
pub mod hoar;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod nullspace;
pub mod pipeline;
pub mod poly;
pub mod realization;
pub mod simulate;
pub mod subspace;

pub use error::{Error, Result};
pub use experiment::{
    crlb_report, run_experiment, write_records_csv, write_summary_json, CellReport, CrlbAtN,
    CrlbReport, ExperimentConfig, ExperimentResult, ModelSpec, Summary, SUMMARY_SCHEMA_VERSION,
};
pub use hoar::{default_order, estimate_hoar, estimate_hoar_ridge, MarkovEstimate};
pub use metrics::{
    aggregate, crlb, fit_score, prediction_error, sensitivities, CellSummary, CrlbEstimate,
    CrlbOptions, Method, Stats, TrialRecord, TrialStatus,
};
pub use model::{PolynomialRoots, StateSpaceModel};
pub use nullspace::{
    alpha_band_toeplitz, build_hankel, estimate_alpha_ols, estimate_alpha_wls, HankelPair,
    NullSpaceEstimate, Stage, Weighting,
};
pub use pipeline::{wnsf_identify, WnsfDiagnostics, WnsfEstimate, WnsfOptions};
pub use realization::{
    assemble_model, build_predictor_regressor, estimate_k_gain, PredictorRegressor,
};
pub use simulate::{arma_simulate, arma_to_model, simulate, simulate_with_innovations, Trajectory};
pub use subspace::{sim_identify, SubspaceConfig, SubspaceEstimate, SubspaceWeighting};
