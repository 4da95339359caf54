//! Trajectory generation for innovations-form models.
//!
//! Sampling is fully deterministic given the seed: innovations come from a
//! ChaCha12 stream keyed by `seed` (`seed_from_u64`), mapped through the
//! ziggurat standard-normal sampler and scaled by `sqrt(sigma2_e)`. The state
//! recursion is the predictor form `x_{k+1} = A_K x_k + K y_k`,
//! `y_k = x_k[0] + e_k`, started from `x_0 = 0`, which is algebraically
//! identical to propagating the state matrix A but never materializes it.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::model::{companion_mul_in_place, StateSpaceModel};
use crate::poly;

/// Samples discarded before recording, unless the caller overrides.
pub const DEFAULT_BURN_IN: usize = 1000;

/// Output series with optional innovations and the seed that produced it
/// (`None` for imported data).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub y: Vec<f64>,
    pub e: Option<Vec<f64>>,
    pub seed: Option<u64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Write as CSV with header `y` (or `y,e` when innovations are present).
    /// Floats use the shortest round-tripping decimal form.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        match &self.e {
            Some(e) => {
                writeln!(w, "y,e")?;
                for (y, e) in self.y.iter().zip(e) {
                    writeln!(w, "{y},{e}")?;
                }
            }
            None => {
                writeln!(w, "y")?;
                for y in &self.y {
                    writeln!(w, "{y}")?;
                }
            }
        }
        Ok(())
    }

    /// Parse the CSV format produced by [`Trajectory::write_csv`].
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty trajectory file".into()))??;
        let with_e = match header.trim() {
            "y" => false,
            "y,e" => true,
            other => {
                return Err(Error::Parse(format!(
                    "unexpected header {other:?}; expected \"y\" or \"y,e\""
                )))
            }
        };
        let mut y = Vec::new();
        let mut e = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line = line?;
            let row = line.trim();
            if row.is_empty() {
                continue;
            }
            let mut fields = row.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| Error::Parse(format!("row {}: missing field", idx + 2)))?
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {}: not a number", idx + 2)))
            };
            y.push(parse(fields.next())?);
            if with_e {
                e.push(parse(fields.next())?);
            }
            if fields.next().is_some() {
                return Err(Error::Parse(format!("row {}: too many fields", idx + 2)));
            }
        }
        if y.is_empty() {
            return Err(Error::Parse("trajectory file has no samples".into()));
        }
        Ok(Self {
            y,
            e: with_e.then_some(e),
            seed: None,
        })
    }
}

/// Simulate `n_samples` outputs after discarding `burn_in` warm-up samples.
pub fn simulate(
    model: &StateSpaceModel,
    n_samples: usize,
    seed: u64,
    burn_in: usize,
) -> Result<Trajectory> {
    run(model, n_samples, seed, burn_in, false)
}

/// As [`simulate`], additionally retaining the innovation sequence.
pub fn simulate_with_innovations(
    model: &StateSpaceModel,
    n_samples: usize,
    seed: u64,
    burn_in: usize,
) -> Result<Trajectory> {
    run(model, n_samples, seed, burn_in, true)
}

fn run(
    model: &StateSpaceModel,
    n_samples: usize,
    seed: u64,
    burn_in: usize,
    retain_e: bool,
) -> Result<Trajectory> {
    if n_samples == 0 {
        return invalid("n_samples must be >= 1");
    }
    let ar = model.ar_coefficients();
    let rho = poly::spectral_radius(&ar)?;
    if rho >= 1.0 {
        return Err(Error::Unstable {
            context: "state matrix A (output process poles)",
            rho,
        });
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let sigma = model.sigma2_e().sqrt();
    let alpha = model.alpha();
    let k_gain = model.k_gain();
    let mut x = vec![0.0; model.n_x()];
    let mut y = Vec::with_capacity(n_samples);
    let mut e = retain_e.then(|| Vec::with_capacity(n_samples));

    for k in 0..burn_in + n_samples {
        let ek: f64 = sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
        let yk = x[0] + ek;
        if k >= burn_in {
            y.push(yk);
            if let Some(e) = e.as_mut() {
                e.push(ek);
            }
        }
        companion_mul_in_place(alpha, &mut x);
        for (xi, ki) in x.iter_mut().zip(k_gain) {
            *xi += ki * yk;
        }
    }
    Ok(Trajectory {
        y,
        e,
        seed: Some(seed),
    })
}

/// Simulate an ARMA process `y_k + a1 y_{k-1} + ... = e_k + c1 e_{k-1} + ...`
/// with unit innovation variance, by mapping it to the equivalent
/// observer-canonical model (`alpha = c`, `k_gain = c - a`, zero-padded to a
/// common order) and delegating to [`simulate`] with the default burn-in.
pub fn arma_simulate(a: &[f64], c: &[f64], n_samples: usize, seed: u64) -> Result<Trajectory> {
    let model = arma_to_model(a, c, 1.0)?;
    simulate(&model, n_samples, seed, DEFAULT_BURN_IN)
}

/// Observer-canonical model equivalent to an ARMA(a, c) process.
pub fn arma_to_model(a: &[f64], c: &[f64], sigma2_e: f64) -> Result<StateSpaceModel> {
    if a.is_empty() && c.is_empty() {
        return invalid("ARMA coefficients must not both be empty");
    }
    let n = a.len().max(c.len());
    let pad = |v: &[f64]| {
        let mut out = v.to_vec();
        out.resize(n, 0.0);
        out
    };
    let (a, c) = (pad(a), pad(c));
    let ar_rho = poly::spectral_radius(&a)?;
    if ar_rho >= 1.0 {
        return Err(Error::Unstable {
            context: "autoregressive polynomial",
            rho: ar_rho,
        });
    }
    let k: Vec<f64> = c.iter().zip(&a).map(|(c, a)| c - a).collect();
    StateSpaceModel::observer_canonical(&c, &k, sigma2_e)
}
