//! `identify`: fit one model to one trajectory and emit a JSON report with
//! the estimate, poles, stage diagnostics, and (given a reference model) the
//! impulse-response FIT score.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use serde::Serialize;
use wnsf::{
    fit_score, sim_identify, wnsf_identify, Method, Result, StateSpaceModel, SubspaceConfig,
    SubspaceWeighting, Trajectory, WnsfOptions,
};

use super::{require_path, write_json, REPORT_SCHEMA_VERSION};
use crate::config::FileConfig;
use crate::model_args::{parse_weighting, ModelArgs};

#[derive(clap::Args, Debug)]
pub struct IdentifyArgs {
    /// Input trajectory CSV (header `y` or `y,e`).
    #[arg(short = 'i', long)]
    pub input: Option<PathBuf>,

    /// State order of the fitted model.
    #[arg(long)]
    pub n_x: Option<usize>,

    /// Estimator: wnsf, wnsf-iterated, or sim.
    #[arg(long)]
    pub method: Option<String>,

    /// First-stage autoregression order (default: data-driven).
    #[arg(long)]
    pub order: Option<usize>,

    /// Weighted refinement passes (default 1 for wnsf, 5 for wnsf-iterated).
    #[arg(long)]
    pub wls_iterations: Option<usize>,

    /// Ridge added to the first-stage normal equations.
    #[arg(long)]
    pub ridge: Option<f64>,

    /// Future horizon for the subspace method.
    #[arg(long)]
    pub f: Option<usize>,

    /// Past horizon for the subspace method.
    #[arg(long)]
    pub p: Option<usize>,

    /// Subspace weighting: cva-like or unweighted.
    #[arg(long)]
    pub weighting: Option<String>,

    /// Optional ground-truth model for FIT scoring (same flags as simulate).
    #[command(flatten)]
    pub truth: ModelArgs,

    /// Impulse-response terms scored by FIT when a reference is given.
    #[arg(long)]
    pub fit_horizon: Option<usize>,

    /// Report path (stdout when omitted).
    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,

    /// Read defaults from a `key = value` manifest; flags win.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

const CONFIG_KEYS: [&str; 16] = [
    "input",
    "n-x",
    "method",
    "order",
    "wls-iterations",
    "ridge",
    "f",
    "p",
    "weighting",
    "alpha",
    "k",
    "sigma2",
    "arma-a",
    "arma-c",
    "fit-horizon",
    "output",
];

#[derive(Serialize)]
struct IdentifyReport {
    schema_version: u32,
    method: &'static str,
    n_samples: usize,
    n_x: usize,
    /// `ok`, or `degraded` when a stage fell back to a safe alternative.
    status: &'static str,
    model: ModelSection,
    predictor_poles: Vec<Pole>,
    process_poles: Vec<Pole>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wnsf: Option<WnsfSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    subspace: Option<SubspaceSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<FitSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit_note: Option<String>,
}

#[derive(Serialize)]
struct ModelSection {
    alpha: Vec<f64>,
    k_gain: Vec<f64>,
    sigma2: f64,
}

#[derive(Serialize)]
struct Pole {
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct WnsfSection {
    alpha_ols: Vec<f64>,
    order: usize,
    n_eff: usize,
    hoar_condition: f64,
    hoar_sigma2: f64,
    weighting_condition: f64,
    weighting_degraded: bool,
    wls_iterations_run: usize,
    gain_condition: f64,
    ridge: Option<f64>,
}

#[derive(Serialize)]
struct SubspaceSection {
    singular_values: Vec<f64>,
    rank: usize,
    f: usize,
    p: usize,
    weighting: &'static str,
}

#[derive(Serialize)]
struct FitSection {
    score: f64,
    horizon: usize,
}

pub fn run(args: &IdentifyArgs) -> Result<()> {
    let file = FileConfig::load_opt(args.config.as_deref())?;
    file.expect_keys(&CONFIG_KEYS)?;

    let input = require_path(args.input.clone(), &file, "input")?;
    let y = Trajectory::read_csv(BufReader::new(File::open(&input)?))?.y;
    let n_x = args.n_x.or(file.scalar("n-x")?).unwrap_or(1);
    let method: Method = match args.method.clone().or_else(|| file.string("method")) {
        Some(s) => s.parse()?,
        None => Method::Wnsf,
    };
    let truth = args.truth.resolve_if_given(&file)?;
    let fit_horizon = args.fit_horizon.or(file.scalar("fit-horizon")?).unwrap_or(100);

    let (model, status, wnsf_section, subspace_section) = match method {
        Method::Wnsf | Method::WnsfIterated => {
            let wls_iterations = args
                .wls_iterations
                .or(file.scalar("wls-iterations")?)
                .unwrap_or(if method == Method::WnsfIterated { 5 } else { 1 });
            let opts = WnsfOptions {
                order: args.order.or(file.scalar("order")?),
                wls_iterations,
                ridge: match args.ridge {
                    Some(r) => Some(r),
                    None => file.scalar("ridge")?,
                },
            };
            let est = wnsf_identify(&y, n_x, &opts)?;
            let d = &est.diagnostics;
            let status = if d.weighting_degraded { "degraded" } else { "ok" };
            let section = WnsfSection {
                alpha_ols: est.alpha_ols.clone(),
                order: d.order,
                n_eff: d.n_eff,
                hoar_condition: d.hoar_condition,
                hoar_sigma2: d.hoar_sigma2,
                weighting_condition: d.weighting_condition,
                weighting_degraded: d.weighting_degraded,
                wls_iterations_run: d.wls_iterations_run,
                gain_condition: d.gain_condition,
                ridge: d.ridge,
            };
            (est.model, status, Some(section), None)
        }
        Method::Sim => {
            let weighting = match args.weighting.clone().or_else(|| file.string("weighting")) {
                Some(s) => parse_weighting(&s)?,
                None => SubspaceWeighting::CvaLike,
            };
            let cfg = SubspaceConfig {
                f: args.f.or(file.scalar("f")?),
                p: args.p.or(file.scalar("p")?),
                weighting,
            };
            let est = sim_identify(&y, n_x, &cfg)?;
            let section = SubspaceSection {
                singular_values: est.singular_values.clone(),
                rank: n_x,
                f: est.f,
                p: est.p,
                weighting: match weighting {
                    SubspaceWeighting::CvaLike => "cva-like",
                    SubspaceWeighting::Unweighted => "unweighted",
                },
            };
            (est.model, "ok", None, Some(section))
        }
    };

    let (fit, fit_note) = score_fit(&model, truth.as_ref(), fit_horizon);
    let report = IdentifyReport {
        schema_version: REPORT_SCHEMA_VERSION,
        method: method.as_str(),
        n_samples: y.len(),
        n_x,
        status,
        model: ModelSection {
            alpha: model.alpha().to_vec(),
            k_gain: model.k_gain().to_vec(),
            sigma2: model.sigma2_e(),
        },
        predictor_poles: poles(&model.characteristic_roots()),
        process_poles: poles(&model.innovation_roots()),
        wnsf: wnsf_section,
        subspace: subspace_section,
        fit,
        fit_note,
    };
    write_json(&report, args.output.as_deref())
}

/// FIT failures (for example an unstable estimated process) do not invalidate
/// the estimate itself, so they are reported as a note instead of an error.
fn score_fit(
    model: &StateSpaceModel,
    truth: Option<&StateSpaceModel>,
    horizon: usize,
) -> (Option<FitSection>, Option<String>) {
    let Some(truth) = truth else {
        return (None, None);
    };
    let attempt = || -> Result<f64> {
        let g_true = truth.impulse_response(horizon)?;
        let g_est = model.impulse_response(horizon)?;
        fit_score(&g_true, &g_est)
    };
    match attempt() {
        Ok(score) => (Some(FitSection { score, horizon }), None),
        Err(e) => (None, Some(format!("fit not computed: {e}"))),
    }
}

fn poles(roots: &wnsf::PolynomialRoots) -> Vec<Pole> {
    roots
        .roots
        .iter()
        .map(|r| Pole { re: r.re, im: r.im })
        .collect()
}
