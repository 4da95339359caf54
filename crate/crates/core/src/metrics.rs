//! Scoring and statistical references: impulse-response FIT, Monte Carlo
//! aggregation, and a simulation-based information-matrix lower bound for the
//! canonical parameters.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::model::{companion_mul_in_place, StateSpaceModel};
use crate::simulate;

/// Estimation methods the experiment runner can benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Null-space fit with a single weighted pass.
    Wnsf,
    /// Null-space fit with repeated reweighting passes.
    WnsfIterated,
    /// Subspace baseline.
    Sim,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Wnsf => "wnsf",
            Method::WnsfIterated => "wnsf-iterated",
            Method::Sim => "sim",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wnsf" => Ok(Method::Wnsf),
            "wnsf-iterated" => Ok(Method::WnsfIterated),
            "sim" => Ok(Method::Sim),
            other => Err(Error::InvalidArgument(format!(
                "unknown method '{other}' (expected wnsf, wnsf-iterated, or sim)"
            ))),
        }
    }
}

/// Outcome class of one Monte Carlo trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Ok,
    /// Estimate produced, but a numerical fallback was taken along the way
    /// (e.g. the weighting collapsed to identity).
    Degraded,
    Failed,
}

impl TrialStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TrialStatus::Ok => "ok",
            TrialStatus::Degraded => "degraded",
            TrialStatus::Failed => "failed",
        }
    }
}

/// One Monte Carlo trial. Failed trials carry no estimates, only `note`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub method: Method,
    /// Sample size the trial ran on.
    pub n_samples: usize,
    /// Autoregression order (null-space methods only).
    pub order: Option<usize>,
    pub trial: usize,
    pub seed: u64,
    pub status: TrialStatus,
    /// Final characteristic-coefficient estimate (weighted stage for the
    /// null-space methods).
    pub alpha_hat: Option<Vec<f64>>,
    pub k_hat: Option<Vec<f64>>,
    /// Unweighted-stage coefficients, when the method has one.
    pub alpha_ols: Option<Vec<f64>>,
    /// Impulse-response FIT against the generating model, in percent.
    pub fit: Option<f64>,
    /// Squared coefficient error `sum_i (alpha_hat_i - alpha_i)^2`.
    pub sq_err_alpha: Option<f64>,
    /// Same for the unweighted stage.
    pub sq_err_alpha_ols: Option<f64>,
    /// Failure or degradation reason.
    pub note: Option<String>,
}

impl TrialRecord {
    /// Record for a trial whose estimator returned an error.
    pub fn failed(
        method: Method,
        n_samples: usize,
        order: Option<usize>,
        trial: usize,
        seed: u64,
        note: String,
    ) -> Self {
        Self {
            method,
            n_samples,
            order,
            trial,
            seed,
            status: TrialStatus::Failed,
            alpha_hat: None,
            k_hat: None,
            alpha_ols: None,
            fit: None,
            sq_err_alpha: None,
            sq_err_alpha_ols: None,
            note: Some(note),
        }
    }
}

/// Order statistics of one scored quantity. `mean` of `sq_err_*` is the MSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub min: f64,
    pub max: f64,
}

fn stats_of(mut xs: Vec<f64>) -> Option<Stats> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let count = xs.len();
    Some(Stats {
        count,
        mean: xs.iter().sum::<f64>() / count as f64,
        median: quantile_sorted(&xs, 0.5),
        q25: quantile_sorted(&xs, 0.25),
        q75: quantile_sorted(&xs, 0.75),
        min: xs[0],
        max: xs[count - 1],
    })
}

/// Linear-interpolation quantile on a sorted slice.
fn quantile_sorted(xs: &[f64], q: f64) -> f64 {
    debug_assert!(!xs.is_empty() && (0.0..=1.0).contains(&q));
    let h = (xs.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    if lo + 1 == xs.len() {
        return xs[lo];
    }
    xs[lo] + (h - lo as f64) * (xs[lo + 1] - xs[lo])
}

/// Per-cell aggregate over trials: outcome counts plus order statistics of
/// FIT and squared coefficient errors. Failures stay visible in `failed`;
/// they are excluded from the score statistics, never from the counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellSummary {
    pub trials: usize,
    pub ok: usize,
    pub degraded: usize,
    pub failed: usize,
    pub fit: Option<Stats>,
    pub sq_err_alpha: Option<Stats>,
    pub sq_err_alpha_ols: Option<Stats>,
}

/// Aggregate one cell's trial records.
///
/// Errors when the slice is empty or when every trial failed
/// ([`Error::AllTrialsFailed`]).
pub fn aggregate(records: &[TrialRecord]) -> Result<CellSummary> {
    if records.is_empty() {
        return invalid("cannot aggregate zero records");
    }
    let mut ok = 0;
    let mut degraded = 0;
    let mut failed = 0;
    let mut fits = Vec::new();
    let mut sq = Vec::new();
    let mut sq_ols = Vec::new();
    for r in records {
        match r.status {
            TrialStatus::Ok => ok += 1,
            TrialStatus::Degraded => degraded += 1,
            TrialStatus::Failed => {
                failed += 1;
                continue;
            }
        }
        if let Some(f) = r.fit {
            fits.push(f);
        }
        if let Some(e) = r.sq_err_alpha {
            sq.push(e);
        }
        if let Some(e) = r.sq_err_alpha_ols {
            sq_ols.push(e);
        }
    }
    if ok + degraded == 0 {
        return Err(Error::AllTrialsFailed(records.len()));
    }
    Ok(CellSummary {
        trials: records.len(),
        ok,
        degraded,
        failed,
        fit: stats_of(fits),
        sq_err_alpha: stats_of(sq),
        sq_err_alpha_ols: stats_of(sq_ols),
    })
}

/// Impulse-response match score
/// `100 (1 - ||g_true - g_est|| / ||g_true - mean(g_true)||)`; 100 is exact.
///
/// Errors with [`Error::UndefinedFit`] when the reference response is
/// constant.
pub fn fit_score(g_true: &[f64], g_est: &[f64]) -> Result<f64> {
    if g_true.len() != g_est.len() {
        return invalid(format!(
            "impulse responses differ in length ({} vs {})",
            g_true.len(),
            g_est.len()
        ));
    }
    if g_true.len() < 2 {
        return invalid("FIT needs at least two impulse-response terms");
    }
    if g_true.iter().chain(g_est).any(|v| !v.is_finite()) {
        return invalid("FIT inputs must be finite");
    }
    let mean = g_true.iter().sum::<f64>() / g_true.len() as f64;
    let denom = g_true.iter().map(|g| (g - mean).powi(2)).sum::<f64>().sqrt();
    if denom == 0.0 {
        return Err(Error::UndefinedFit);
    }
    let num = g_true
        .iter()
        .zip(g_est)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(100.0 * (1.0 - num / denom))
}

/// One-step prediction errors of `model` on `y`, from a zero initial
/// predictor state.
pub fn prediction_error(model: &StateSpaceModel, y: &[f64]) -> Vec<f64> {
    predictor_errors(model.alpha(), model.k_gain(), y)
}

fn predictor_errors(alpha: &[f64], k: &[f64], y: &[f64]) -> Vec<f64> {
    let n_x = alpha.len();
    let mut x = vec![0.0; n_x];
    let mut eps = Vec::with_capacity(y.len());
    for &yk in y {
        eps.push(yk - x[0]);
        companion_mul_in_place(alpha, &mut x);
        for (xi, ki) in x.iter_mut().zip(k) {
            *xi += ki * yk;
        }
    }
    eps
}

/// Central-difference sensitivities of the prediction error with respect to
/// the canonical parameters `theta = (alpha_1..alpha_nx, k_1..k_nx)`; column
/// `j` holds `d eps / d theta_j` along the record.
///
/// A parameter whose perturbed filter overflows (the perturbation can leave
/// the stability region) is retried once with a tenth of the step before
/// failing with [`Error::NonFinite`].
pub fn sensitivities(model: &StateSpaceModel, y: &[f64], fd_step: f64) -> Result<DMatrix<f64>> {
    if !(fd_step.is_finite() && fd_step > 0.0) {
        return invalid("finite-difference step must be positive and finite");
    }
    if y.is_empty() {
        return invalid("sensitivities need at least one sample");
    }
    let n_x = model.n_x();
    let dim = 2 * n_x;
    let mut z = DMatrix::zeros(y.len(), dim);
    for j in 0..dim {
        let mut step = fd_step;
        let mut done = false;
        for _attempt in 0..2 {
            let (plus, minus) = perturbed_errors(model, y, j, step);
            if plus.iter().chain(minus.iter()).all(|v| v.is_finite()) {
                let scale = 0.5 / step;
                for (i, (p, m)) in plus.iter().zip(&minus).enumerate() {
                    z[(i, j)] = (p - m) * scale;
                }
                done = true;
                break;
            }
            step *= 0.1;
        }
        if !done {
            return Err(Error::NonFinite {
                context: "finite-difference sensitivity filter",
                iteration: j,
            });
        }
    }
    Ok(z)
}

fn perturbed_errors(
    model: &StateSpaceModel,
    y: &[f64],
    param: usize,
    step: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n_x = model.n_x();
    let mut alpha = model.alpha().to_vec();
    let mut k = model.k_gain().to_vec();
    let slot = if param < n_x {
        &mut alpha[param]
    } else {
        &mut k[param - n_x]
    };
    let base = *slot;
    *slot = base + step;
    let plus = predictor_errors(&alpha, &k, y);
    let slot = if param < n_x {
        &mut alpha[param]
    } else {
        &mut k[param - n_x]
    };
    *slot = base - step;
    let minus = predictor_errors(&alpha, &k, y);
    (plus, minus)
}

/// Settings for the simulation-based information bound.
#[derive(Debug, Clone)]
pub struct CrlbOptions {
    /// Samples per independent average.
    pub horizon: usize,
    /// Number of independent averages (standard errors need >= 2).
    pub averages: usize,
    /// Stationarity burn-in for each simulated record.
    pub burn_in: usize,
    /// Central-difference step on the parameters.
    pub fd_step: f64,
}

impl Default for CrlbOptions {
    fn default() -> Self {
        Self {
            horizon: 100_000,
            averages: 4,
            burn_in: simulate::DEFAULT_BURN_IN,
            fd_step: 1e-6,
        }
    }
}

/// Per-sample information matrix and parameter-covariance lower bound over
/// `theta = (alpha, k_gain)`.
#[derive(Debug, Clone)]
pub struct CrlbEstimate {
    /// Average information per sample (2 n_x square).
    pub fisher_per_sample: DMatrix<f64>,
    /// Element-wise standard error of `fisher_per_sample` across the
    /// independent averages (zero matrix when `averages == 1`).
    pub fisher_std_err: DMatrix<f64>,
    /// Inverse information; `None` when the matrix is numerically singular
    /// (non-identifiable parameterization, e.g. zero gain).
    pub covariance_per_sample: Option<DMatrix<f64>>,
    /// Eigenvalue condition number of the information matrix.
    pub condition: f64,
    pub near_singular: bool,
    pub horizon: usize,
    pub averages: usize,
}

impl CrlbEstimate {
    fn diag_over(&self, range: std::ops::Range<usize>, n_samples: usize) -> Option<Vec<f64>> {
        self.covariance_per_sample
            .as_ref()
            .map(|c| range.map(|i| c[(i, i)] / n_samples as f64).collect())
    }

    /// Variance lower bounds for the characteristic coefficients at a given
    /// sample size.
    pub fn alpha_variances(&self, n_samples: usize) -> Option<Vec<f64>> {
        let n_x = self.fisher_per_sample.nrows() / 2;
        self.diag_over(0..n_x, n_samples)
    }

    /// Variance lower bounds for the gain entries at a given sample size.
    pub fn gain_variances(&self, n_samples: usize) -> Option<Vec<f64>> {
        let n_x = self.fisher_per_sample.nrows() / 2;
        self.diag_over(n_x..2 * n_x, n_samples)
    }
}

const CRLB_CONDITION_LIMIT: f64 = 1e12;
/// Sub-stream stride for the independent averages (golden-ratio increment,
/// so run seeds never collide for adjacent base seeds).
const CRLB_SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// Estimate the per-sample information matrix of the canonical parameters by
/// long-sample averaging of finite-difference error sensitivities, and invert
/// it into a covariance lower bound.
///
/// The model's process matrix must be stable (the average is over the
/// stationary law). Averages run in parallel with per-run seeds
/// `seed + r * stride`, so the result does not depend on scheduling.
///
/// The bound on (alpha, k) does not depend on the innovation variance: the
/// sensitivities scale with the data, which scales with sigma, and the
/// information normalizes by sigma^2. The estimate is therefore evaluated at
/// unit variance, making the output bitwise identical across `sigma2_e`.
pub fn crlb(model: &StateSpaceModel, seed: u64, opts: &CrlbOptions) -> Result<CrlbEstimate> {
    if opts.averages == 0 {
        return invalid("need at least one average");
    }
    if opts.horizon < 100 {
        return invalid("horizon must be at least 100 samples");
    }
    let unit = StateSpaceModel::observer_canonical(model.alpha(), model.k_gain(), 1.0)?;
    let dim = 2 * unit.n_x();
    // The filter starts from a zero state while the data are stationary; drop
    // the transient before averaging.
    let warmup = 1000.min(opts.horizon / 10);
    let rows = opts.horizon - warmup;

    let per_run: Vec<DMatrix<f64>> = (0..opts.averages)
        .into_par_iter()
        .map(|r| -> Result<DMatrix<f64>> {
            let run_seed = seed.wrapping_add((r as u64).wrapping_mul(CRLB_SEED_STRIDE));
            let t = simulate::simulate(&unit, opts.horizon, run_seed, opts.burn_in)?;
            let z = sensitivities(&unit, &t.y, opts.fd_step)?;
            let tail = z.rows(warmup, rows).into_owned();
            Ok(linalg::gram(&tail) / rows as f64)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut fisher = DMatrix::zeros(dim, dim);
    for m in &per_run {
        fisher += m;
    }
    fisher /= opts.averages as f64;
    let mut std_err = DMatrix::zeros(dim, dim);
    if opts.averages >= 2 {
        for m in &per_run {
            let d = m - &fisher;
            std_err += d.component_mul(&d);
        }
        std_err /= (opts.averages * (opts.averages - 1)) as f64;
        std_err.apply(|v| *v = v.sqrt());
    }

    let eigen = SymmetricEigen::new(fisher.clone());
    let lam_max = eigen.eigenvalues.max();
    let lam_min = eigen.eigenvalues.min();
    let condition = if lam_min > 0.0 {
        lam_max / lam_min
    } else {
        f64::INFINITY
    };
    let near_singular = !(condition <= CRLB_CONDITION_LIMIT);
    let covariance_per_sample = if near_singular {
        None
    } else {
        nalgebra::Cholesky::new(fisher.clone()).map(|c| c.inverse())
    };
    let near_singular = near_singular || covariance_per_sample.is_none();

    Ok(CrlbEstimate {
        fisher_per_sample: fisher,
        fisher_std_err: std_err,
        covariance_per_sample,
        condition,
        near_singular,
        horizon: opts.horizon,
        averages: opts.averages,
    })
}
