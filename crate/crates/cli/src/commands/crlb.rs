//! `crlb`: evaluate the numeric parameter-variance lower bound for a model
//! and report per-sample values plus the diagonal at each requested sample
//! size. The bound does not depend on the innovation variance, and the
//! output deliberately omits it so equal models produce identical files.

use std::path::PathBuf;

use serde::Serialize;
use wnsf::{crlb_report, CrlbOptions, CrlbReport, Result};

use super::{write_json, REPORT_SCHEMA_VERSION};
use crate::config::{parse_list, FileConfig};
use crate::model_args::ModelArgs;

#[derive(clap::Args, Debug)]
pub struct CrlbArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Sample sizes at which to report the bound, e.g. `[300,3000]`.
    #[arg(long)]
    pub n_samples: Option<String>,

    /// Base seed for the simulated averages.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Samples per independent average.
    #[arg(long)]
    pub horizon: Option<usize>,

    /// Independent averages (standard errors need at least 2).
    #[arg(long)]
    pub averages: Option<usize>,

    /// Stationarity burn-in for each simulated record.
    #[arg(long)]
    pub burn_in: Option<usize>,

    /// Central-difference step on the parameters.
    #[arg(long)]
    pub fd_step: Option<f64>,

    /// Report path (stdout when omitted).
    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,

    /// Read defaults from a `key = value` manifest; flags win.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

const CONFIG_KEYS: [&str; 12] = [
    "alpha",
    "k",
    "sigma2",
    "arma-a",
    "arma-c",
    "n-samples",
    "seed",
    "horizon",
    "averages",
    "burn-in",
    "fd-step",
    "output",
];

#[derive(Serialize)]
struct CrlbJson {
    schema_version: u32,
    model: CrlbModel,
    seed: u64,
    report: CrlbReport,
}

#[derive(Serialize)]
struct CrlbModel {
    alpha: Vec<f64>,
    k_gain: Vec<f64>,
}

pub fn run(args: &CrlbArgs) -> Result<()> {
    let file = FileConfig::load_opt(args.config.as_deref())?;
    file.expect_keys(&CONFIG_KEYS)?;

    let model = args.model.resolve_or_default(&file)?;
    let n_samples = match args.n_samples.clone().or_else(|| file.string("n-samples")) {
        Some(text) => parse_list(&text, "n-samples")?,
        None => vec![300, 600, 1000, 3000],
    };
    let seed = args.seed.or(file.scalar("seed")?).unwrap_or(0);
    let mut opts = CrlbOptions::default();
    if let Some(v) = args.horizon.or(file.scalar("horizon")?) {
        opts.horizon = v;
    }
    if let Some(v) = args.averages.or(file.scalar("averages")?) {
        opts.averages = v;
    }
    if let Some(v) = args.burn_in.or(file.scalar("burn-in")?) {
        opts.burn_in = v;
    }
    if let Some(v) = args.fd_step.or(file.scalar("fd-step")?) {
        opts.fd_step = v;
    }

    let report = crlb_report(&model, seed, &opts, &n_samples)?;
    let json = CrlbJson {
        schema_version: REPORT_SCHEMA_VERSION,
        model: CrlbModel {
            alpha: model.alpha().to_vec(),
            k_gain: model.k_gain().to_vec(),
        },
        seed,
        report,
    };
    write_json(&json, args.output.as_deref())
}
