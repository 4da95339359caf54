//! `simulate`: write one trajectory as CSV plus a JSON sidecar recording the
//! seed and model, so any output file is self-describing and reproducible.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use serde::Serialize;
use wnsf::simulate::DEFAULT_BURN_IN;
use wnsf::{simulate, simulate_with_innovations, Result};

use super::{require_path, write_json, REPORT_SCHEMA_VERSION};
use crate::config::FileConfig;
use crate::model_args::ModelArgs;

#[derive(clap::Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Number of output samples to keep.
    #[arg(long)]
    pub n: Option<usize>,

    /// RNG seed for the innovation sequence.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Warm-up samples discarded before recording.
    #[arg(long)]
    pub burn_in: Option<usize>,

    /// Also record the innovation sequence as a second CSV column.
    #[arg(long)]
    pub with_innovations: bool,

    /// Output CSV path; a `<stem>.meta.json` sidecar is written next to it.
    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,

    /// Read defaults from a `key = value` manifest; flags win.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

const CONFIG_KEYS: [&str; 10] = [
    "alpha",
    "k",
    "sigma2",
    "arma-a",
    "arma-c",
    "n",
    "seed",
    "burn-in",
    "with-innovations",
    "output",
];

#[derive(Serialize)]
struct SimulateMeta {
    schema_version: u32,
    seed: u64,
    n_samples: usize,
    burn_in: usize,
    with_innovations: bool,
    model: ModelMeta,
}

#[derive(Serialize)]
struct ModelMeta {
    alpha: Vec<f64>,
    k_gain: Vec<f64>,
    sigma2: f64,
}

pub fn run(args: &SimulateArgs) -> Result<()> {
    let file = FileConfig::load_opt(args.config.as_deref())?;
    file.expect_keys(&CONFIG_KEYS)?;

    let model = args.model.resolve_or_default(&file)?;
    let n = args.n.or(file.scalar("n")?).unwrap_or(1000);
    let seed = args.seed.or(file.scalar("seed")?).unwrap_or(0);
    let burn_in = args
        .burn_in
        .or(file.scalar("burn-in")?)
        .unwrap_or(DEFAULT_BURN_IN);
    let with_innovations =
        args.with_innovations || file.scalar("with-innovations")?.unwrap_or(false);
    let output = require_path(args.output.clone(), &file, "output")?;

    let trajectory = if with_innovations {
        simulate_with_innovations(&model, n, seed, burn_in)?
    } else {
        simulate(&model, n, seed, burn_in)?
    };

    let mut w = BufWriter::new(File::create(&output)?);
    trajectory.write_csv(&mut w)?;
    w.flush()?;

    let meta = SimulateMeta {
        schema_version: REPORT_SCHEMA_VERSION,
        seed,
        n_samples: n,
        burn_in,
        with_innovations,
        model: ModelMeta {
            alpha: model.alpha().to_vec(),
            k_gain: model.k_gain().to_vec(),
            sigma2: model.sigma2_e(),
        },
    };
    write_json(&meta, Some(&output.with_extension("meta.json")))
}
