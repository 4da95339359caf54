//! Reproducible Monte Carlo benchmark over a (method, sample size) grid.
//!
//! Trials are embarrassingly parallel; artifacts are made deterministic by
//! per-trial seeds (`base_seed + trial`) and post-hoc sorting by
//! (method, N, trial), so the CSV and summary never depend on scheduling.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::metrics::{
    self, aggregate, fit_score, CellSummary, CrlbOptions, Method, TrialRecord, TrialStatus,
};
use crate::model::StateSpaceModel;
use crate::pipeline::{wnsf_identify, WnsfOptions};
use crate::simulate;
use crate::subspace::{sim_identify, SubspaceConfig};

/// Version tag written into every summary JSON.
pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

/// Seed offset for the bound evaluation, far above any realistic trial index
/// so the bound never shares a stream with a trial.
const CRLB_SEED_OFFSET: u64 = 1 << 20;

/// Full description of one benchmark run.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Generating model: characteristic coefficients, gain, noise variance.
    pub alpha: Vec<f64>,
    pub k_gain: Vec<f64>,
    pub sigma2: f64,
    /// State order handed to the estimators.
    pub n_x: usize,
    /// Sample-size grid.
    pub n_samples: Vec<usize>,
    /// Autoregression orders aligned with `n_samples`; `None` lets each trial
    /// pick the data-driven default.
    pub orders: Option<Vec<usize>>,
    pub trials: usize,
    /// Trial `t` uses seed `base_seed + t` for its data record.
    pub base_seed: u64,
    pub methods: Vec<Method>,
    /// Refinement passes for [`Method::WnsfIterated`].
    pub wls_iterations: usize,
    /// Optional autoregression ridge, passed through to the estimator.
    pub ridge: Option<f64>,
    /// Impulse-response terms scored by FIT.
    pub fit_horizon: usize,
    /// Stationarity burn-in for each simulated record.
    pub burn_in: usize,
    pub subspace: SubspaceConfig,
    /// Whether to evaluate the parameter-variance lower bound alongside.
    pub with_crlb: bool,
    pub crlb: CrlbOptions,
}

impl Default for ExperimentConfig {
    /// The benchmark study defaults: first-order model (alpha 0.9, gain 1.7,
    /// unit variance), the paired (N, order) grid, 1000 trials.
    fn default() -> Self {
        Self {
            alpha: vec![0.9],
            k_gain: vec![1.7],
            sigma2: 1.0,
            n_x: 1,
            n_samples: vec![300, 600, 1000, 3000],
            orders: Some(vec![30, 40, 50, 60]),
            trials: 1000,
            base_seed: 42,
            methods: vec![Method::Wnsf, Method::Sim],
            wls_iterations: 5,
            ridge: None,
            fit_horizon: 100,
            burn_in: simulate::DEFAULT_BURN_IN,
            subspace: SubspaceConfig::default(),
            with_crlb: true,
            crlb: CrlbOptions::default(),
        }
    }
}

impl ExperimentConfig {
    /// Validate the grid and build the generating model.
    pub fn validate(&self) -> Result<StateSpaceModel> {
        let model = StateSpaceModel::observer_canonical(&self.alpha, &self.k_gain, self.sigma2)?;
        if !model.is_innovation_stable() {
            return Err(Error::Unstable {
                context: "experiment generating model",
                rho: model.innovation_roots().spectral_radius(),
            });
        }
        if self.n_x == 0 {
            return invalid("estimation order n_x must be >= 1");
        }
        if self.n_samples.is_empty() {
            return invalid("n_samples grid must not be empty");
        }
        if self.n_samples.contains(&0) {
            return invalid("sample sizes must be positive");
        }
        if let Some(orders) = &self.orders {
            if orders.len() != self.n_samples.len() {
                return invalid(format!(
                    "orders list has length {}, expected one per sample size ({})",
                    orders.len(),
                    self.n_samples.len()
                ));
            }
        }
        if self.trials == 0 {
            return invalid("trials must be >= 1");
        }
        if self.methods.is_empty() {
            return invalid("methods must not be empty");
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return invalid("methods must not repeat");
        }
        if self.wls_iterations == 0 {
            return invalid("wls_iterations must be >= 1");
        }
        if self.fit_horizon < 2 {
            return invalid("fit_horizon must be >= 2");
        }
        Ok(model)
    }
}

/// Generating-model echo embedded in the summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub alpha: Vec<f64>,
    pub k_gain: Vec<f64>,
    pub sigma2: f64,
}

/// Aggregates of one (method, N) cell, plus its failure bookkeeping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellReport {
    pub method: Method,
    pub n_samples: usize,
    /// Autoregression order used (null-space methods with a fixed grid).
    pub order: Option<usize>,
    pub summary: CellSummary,
    /// Distinct failure/degradation notes with their multiplicities.
    pub notes: BTreeMap<String, usize>,
}

/// Variance lower bounds scaled to one grid point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrlbAtN {
    pub n_samples: usize,
    pub alpha_variances: Option<Vec<f64>>,
    pub gain_variances: Option<Vec<f64>>,
}

/// Bound evaluation attached to a summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrlbReport {
    pub horizon: usize,
    pub averages: usize,
    pub condition: f64,
    pub near_singular: bool,
    /// Per-sample covariance diagonal for the characteristic coefficients.
    pub per_sample_alpha: Option<Vec<f64>>,
    pub per_sample_gain: Option<Vec<f64>>,
    pub per_n: Vec<CrlbAtN>,
}

/// Whole-run aggregate written as the summary JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub model: ModelSpec,
    pub n_x: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub fit_horizon: usize,
    pub cells: Vec<CellReport>,
    pub crlb: Option<CrlbReport>,
}

/// Records plus their aggregate.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    /// All trial records, sorted by (method, N, trial).
    pub records: Vec<TrialRecord>,
    pub summary: Summary,
}

/// Run the full benchmark grid.
///
/// Individual trial failures are recorded with status `failed` and the run
/// continues; a cell whose trials all fail aborts the run
/// ([`Error::AllTrialsFailed`]).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let model = cfg.validate()?;
    let g_true = model.impulse_response(cfg.fit_horizon)?;

    struct Job {
        method: Method,
        n: usize,
        order: Option<usize>,
        trial: usize,
    }
    let mut jobs = Vec::with_capacity(cfg.methods.len() * cfg.n_samples.len() * cfg.trials);
    for &method in &cfg.methods {
        for (ci, &n) in cfg.n_samples.iter().enumerate() {
            let order = cfg.orders.as_ref().map(|o| o[ci]);
            for trial in 0..cfg.trials {
                jobs.push(Job {
                    method,
                    n,
                    order,
                    trial,
                });
            }
        }
    }

    let mut records: Vec<TrialRecord> = jobs
        .into_par_iter()
        .map(|job| run_trial(&model, &g_true, cfg, job.method, job.n, job.order, job.trial))
        .collect();
    records.sort_by(|a, b| {
        (a.method.as_str(), a.n_samples, a.trial).cmp(&(b.method.as_str(), b.n_samples, b.trial))
    });

    let mut cells = Vec::new();
    let mut start = 0;
    while start < records.len() {
        let key = (records[start].method, records[start].n_samples);
        let mut end = start;
        while end < records.len() && (records[end].method, records[end].n_samples) == key {
            end += 1;
        }
        let cell = &records[start..end];
        let summary = aggregate(cell)?;
        let mut notes = BTreeMap::new();
        for r in cell {
            if let Some(note) = &r.note {
                *notes.entry(note.clone()).or_insert(0usize) += 1;
            }
        }
        cells.push(CellReport {
            method: key.0,
            n_samples: key.1,
            order: cell.iter().find_map(|r| r.order),
            summary,
            notes,
        });
        start = end;
    }

    let crlb_report = if cfg.with_crlb {
        Some(crlb_report(
            &model,
            cfg.base_seed.wrapping_add(CRLB_SEED_OFFSET),
            &cfg.crlb,
            &cfg.n_samples,
        )?)
    } else {
        None
    };

    Ok(ExperimentResult {
        records,
        summary: Summary {
            schema_version: SUMMARY_SCHEMA_VERSION,
            model: ModelSpec {
                alpha: cfg.alpha.clone(),
                k_gain: cfg.k_gain.clone(),
                sigma2: cfg.sigma2,
            },
            n_x: cfg.n_x,
            trials: cfg.trials,
            base_seed: cfg.base_seed,
            fit_horizon: cfg.fit_horizon,
            cells,
            crlb: crlb_report,
        },
    })
}

/// Numeric lower bound packaged with the per-`N` covariance diagonals
/// (per-sample values divided by each sample count).
pub fn crlb_report(
    model: &StateSpaceModel,
    seed: u64,
    opts: &CrlbOptions,
    n_samples: &[usize],
) -> Result<CrlbReport> {
    let est = metrics::crlb(model, seed, opts)?;
    let n_x = model.n_x();
    let per_n = n_samples
        .iter()
        .map(|&n| CrlbAtN {
            n_samples: n,
            alpha_variances: est.alpha_variances(n),
            gain_variances: est.gain_variances(n),
        })
        .collect();
    Ok(CrlbReport {
        horizon: est.horizon,
        averages: est.averages,
        condition: est.condition,
        near_singular: est.near_singular,
        per_sample_alpha: est
            .covariance_per_sample
            .as_ref()
            .map(|c| (0..n_x).map(|i| c[(i, i)]).collect()),
        per_sample_gain: est
            .covariance_per_sample
            .as_ref()
            .map(|c| (n_x..2 * n_x).map(|i| c[(i, i)]).collect()),
        per_n,
    })
}

fn run_trial(
    model: &StateSpaceModel,
    g_true: &[f64],
    cfg: &ExperimentConfig,
    method: Method,
    n: usize,
    order: Option<usize>,
    trial: usize,
) -> TrialRecord {
    let seed = cfg.base_seed.wrapping_add(trial as u64);
    let record_order = if method == Method::Sim { None } else { order };
    let fail = |note: String| TrialRecord::failed(method, n, record_order, trial, seed, note);

    let t = match simulate::simulate(model, n, seed, cfg.burn_in) {
        Ok(t) => t,
        Err(e) => return fail(format!("simulation: {e}")),
    };

    let (est_model, alpha_ols, used_order, degraded_note) = match method {
        Method::Wnsf | Method::WnsfIterated => {
            let opts = WnsfOptions {
                order,
                wls_iterations: if method == Method::WnsfIterated {
                    cfg.wls_iterations
                } else {
                    1
                },
                ridge: cfg.ridge,
            };
            match wnsf_identify(&t.y, cfg.n_x, &opts) {
                Ok(est) => {
                    let note = est
                        .diagnostics
                        .weighting_degraded
                        .then(|| "weighting fell back to identity".to_string());
                    (est.model, Some(est.alpha_ols), Some(est.diagnostics.order), note)
                }
                Err(e) => return fail(e.to_string()),
            }
        }
        Method::Sim => match sim_identify(&t.y, cfg.n_x, &cfg.subspace) {
            Ok(est) => (est.model, None, None, None),
            Err(e) => return fail(e.to_string()),
        },
    };

    let g_est = match est_model.impulse_response(g_true.len()) {
        Ok(g) => g,
        Err(e) => return fail(format!("impulse response: {e}")),
    };
    let fit = match fit_score(g_true, &g_est) {
        Ok(f) => Some(f),
        Err(Error::InvalidArgument(_)) => {
            return fail("non-finite impulse response from the estimate".to_string())
        }
        Err(_) => None,
    };

    let same_order = est_model.n_x() == model.n_x();
    let sq = |hat: &[f64]| {
        hat.iter()
            .zip(model.alpha())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
    };
    TrialRecord {
        method,
        n_samples: n,
        order: used_order,
        trial,
        seed,
        status: if degraded_note.is_some() {
            TrialStatus::Degraded
        } else {
            TrialStatus::Ok
        },
        alpha_hat: Some(est_model.alpha().to_vec()),
        k_hat: Some(est_model.k_gain().to_vec()),
        sq_err_alpha: same_order.then(|| sq(est_model.alpha())),
        sq_err_alpha_ols: match (&alpha_ols, same_order) {
            (Some(ols), true) => Some(sq(ols)),
            _ => None,
        },
        alpha_ols,
        fit,
        note: degraded_note,
    }
}

/// Write the per-trial CSV: one row per record, columns
/// `method,N,n,trial,seed,alpha_hat_1..,k_hat_1..,fit,status`, empty fields
/// for quantities a record does not carry.
pub fn write_records_csv<W: Write>(records: &[TrialRecord], n_x: usize, w: &mut W) -> Result<()> {
    write!(w, "method,N,n,trial,seed")?;
    for i in 1..=n_x {
        write!(w, ",alpha_hat_{i}")?;
    }
    for i in 1..=n_x {
        write!(w, ",k_hat_{i}")?;
    }
    writeln!(w, ",fit,status")?;

    let write_vec = |w: &mut W, v: &Option<Vec<f64>>| -> Result<()> {
        match v {
            Some(xs) => {
                if xs.len() != n_x {
                    return invalid(format!(
                        "record carries {} coefficients, expected n_x = {n_x}",
                        xs.len()
                    ));
                }
                for x in xs {
                    write!(w, ",{x}")?;
                }
            }
            None => {
                for _ in 0..n_x {
                    write!(w, ",")?;
                }
            }
        }
        Ok(())
    };

    for r in records {
        write!(w, "{},{},", r.method, r.n_samples)?;
        if let Some(n) = r.order {
            write!(w, "{n}")?;
        }
        write!(w, ",{},{}", r.trial, r.seed)?;
        write_vec(w, &r.alpha_hat)?;
        write_vec(w, &r.k_hat)?;
        match r.fit {
            Some(f) => write!(w, ",{f}")?,
            None => write!(w, ",")?,
        }
        writeln!(w, ",{}", r.status.as_str())?;
    }
    Ok(())
}

/// Write the summary as pretty JSON with a trailing newline.
pub fn write_summary_json<W: Write>(summary: &Summary, w: &mut W) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, summary)
        .map_err(|e| Error::Parse(format!("summary serialization: {e}")))?;
    writeln!(w)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            trials: 2,
            n_samples: vec![150, 220],
            orders: Some(vec![15, 18]),
            methods: vec![Method::Wnsf],
            burn_in: 200,
            with_crlb: false,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn grid_produces_one_record_per_job_in_order() {
        let res = run_experiment(&tiny_config()).unwrap();
        assert_eq!(res.records.len(), 4);
        let keys: Vec<_> = res
            .records
            .iter()
            .map(|r| (r.method, r.n_samples, r.trial))
            .collect();
        assert_eq!(
            keys,
            vec![
                (Method::Wnsf, 150, 0),
                (Method::Wnsf, 150, 1),
                (Method::Wnsf, 220, 0),
                (Method::Wnsf, 220, 1),
            ]
        );
        for r in &res.records {
            assert_eq!(r.seed, 42 + r.trial as u64);
            assert_eq!(r.status, TrialStatus::Ok);
            assert!(r.fit.unwrap() <= 100.0);
        }
        assert_eq!(res.summary.cells.len(), 2);
        assert_eq!(res.summary.cells[0].order, Some(15));
    }

    #[test]
    fn single_trial_yields_methods_times_grid_rows() {
        let cfg = ExperimentConfig {
            trials: 1,
            n_samples: vec![400],
            orders: Some(vec![20]),
            methods: vec![Method::Wnsf, Method::Sim],
            burn_in: 200,
            with_crlb: false,
            ..ExperimentConfig::default()
        };
        let res = run_experiment(&cfg).unwrap();
        assert_eq!(res.records.len(), 2);
        // Lexicographic method order: sim before wnsf.
        assert_eq!(res.records[0].method, Method::Sim);
        assert_eq!(res.records[0].order, None);
        assert_eq!(res.records[1].method, Method::Wnsf);
        assert_eq!(res.records[1].order, Some(20));
    }

    #[test]
    fn artifacts_are_bitwise_deterministic() {
        let cfg = ExperimentConfig {
            trials: 3,
            n_samples: vec![250],
            orders: None,
            methods: vec![Method::Wnsf, Method::Sim],
            burn_in: 200,
            with_crlb: true,
            crlb: CrlbOptions {
                horizon: 2000,
                averages: 2,
                ..CrlbOptions::default()
            },
            ..ExperimentConfig::default()
        };
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        let mut json_a = Vec::new();
        let mut json_b = Vec::new();
        let ra = run_experiment(&cfg).unwrap();
        let rb = run_experiment(&cfg).unwrap();
        write_records_csv(&ra.records, cfg.n_x, &mut csv_a).unwrap();
        write_records_csv(&rb.records, cfg.n_x, &mut csv_b).unwrap();
        write_summary_json(&ra.summary, &mut json_a).unwrap();
        write_summary_json(&rb.summary, &mut json_b).unwrap();
        assert_eq!(csv_a, csv_b);
        assert_eq!(json_a, json_b);
    }

    #[test]
    fn csv_schema_is_stable() {
        let res = run_experiment(&tiny_config()).unwrap();
        let mut buf = Vec::new();
        write_records_csv(&res.records, 1, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "method,N,n,trial,seed,alpha_hat_1,k_hat_1,fit,status"
        );
        for line in lines {
            assert_eq!(line.split(',').count(), 9, "row: {line}");
        }
    }

    #[test]
    fn crlb_report_scales_inversely_with_n() {
        let cfg = ExperimentConfig {
            trials: 1,
            n_samples: vec![300, 3000],
            orders: Some(vec![20, 30]),
            methods: vec![Method::Wnsf],
            burn_in: 200,
            crlb: CrlbOptions {
                horizon: 3000,
                averages: 1,
                ..CrlbOptions::default()
            },
            ..ExperimentConfig::default()
        };
        let res = run_experiment(&cfg).unwrap();
        let crlb = res.summary.crlb.unwrap();
        assert!(!crlb.near_singular);
        let v300 = crlb.per_n[0].alpha_variances.as_ref().unwrap()[0];
        let v3000 = crlb.per_n[1].alpha_variances.as_ref().unwrap()[0];
        approx::assert_relative_eq!(v300, 10.0 * v3000, max_relative = 1e-14);
    }

    #[test]
    fn all_failed_cell_aborts() {
        // 60 samples cannot support the default data-driven order.
        let cfg = ExperimentConfig {
            trials: 2,
            n_samples: vec![60],
            orders: None,
            methods: vec![Method::Wnsf],
            burn_in: 100,
            with_crlb: false,
            ..ExperimentConfig::default()
        };
        assert!(matches!(
            run_experiment(&cfg),
            Err(Error::AllTrialsFailed(2))
        ));
    }

    #[test]
    fn config_validation_catches_grid_mistakes() {
        let ok = ExperimentConfig::default();
        assert!(ok.validate().is_ok());
        let bad = ExperimentConfig {
            orders: Some(vec![30]),
            ..ExperimentConfig::default()
        };
        assert!(bad.validate().is_err());
        let dup = ExperimentConfig {
            methods: vec![Method::Wnsf, Method::Wnsf],
            ..ExperimentConfig::default()
        };
        assert!(dup.validate().is_err());
        let unstable = ExperimentConfig {
            alpha: vec![0.9],
            k_gain: vec![2.0],
            ..ExperimentConfig::default()
        };
        assert!(matches!(unstable.validate(), Err(Error::Unstable { .. })));
    }
}
