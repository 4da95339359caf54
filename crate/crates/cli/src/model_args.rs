//! Model specification shared by the subcommands: either the observer
//! canonical pair `alpha`/`k`, or ARMA polynomial coefficients, plus the
//! innovation variance.

use wnsf::{arma_to_model, Error, Result, StateSpaceModel, SubspaceWeighting};

use crate::config::{parse_list, FileConfig};

#[derive(clap::Args, Debug, Clone, Default)]
pub struct ModelArgs {
    /// Characteristic (predictor) coefficients, e.g. `[0.9]`;
    /// pairs with --k. Default model: alpha=[0.9], k=[1.7].
    #[arg(long, value_name = "LIST", allow_hyphen_values = true)]
    pub alpha: Option<String>,

    /// Gain column aligned with --alpha, e.g. `[1.7]`.
    #[arg(long, value_name = "LIST", allow_hyphen_values = true)]
    pub k: Option<String>,

    /// Innovation variance (default 1).
    #[arg(long, allow_hyphen_values = true)]
    pub sigma2: Option<f64>,

    /// Autoregressive coefficients of an ARMA form, e.g. `-0.8`;
    /// alternative to --alpha/--k.
    #[arg(long, value_name = "LIST", allow_hyphen_values = true)]
    pub arma_a: Option<String>,

    /// Moving-average coefficients of an ARMA form, e.g. `0.9`.
    #[arg(long, value_name = "LIST", allow_hyphen_values = true)]
    pub arma_c: Option<String>,
}

struct Gathered {
    alpha: Option<Vec<f64>>,
    k: Option<Vec<f64>>,
    arma_a: Option<Vec<f64>>,
    arma_c: Option<Vec<f64>>,
    sigma2: f64,
}

impl ModelArgs {
    fn gather(&self, file: &FileConfig) -> Result<Gathered> {
        let take = |flag: &Option<String>, key: &str| -> Result<Option<Vec<f64>>> {
            match flag {
                Some(text) => parse_list(text, key).map(Some),
                None => file.list(key),
            }
        };
        Ok(Gathered {
            alpha: take(&self.alpha, "alpha")?,
            k: take(&self.k, "k")?,
            arma_a: take(&self.arma_a, "arma-a")?,
            arma_c: take(&self.arma_c, "arma-c")?,
            sigma2: match self.sigma2 {
                Some(v) => v,
                None => file.scalar("sigma2")?.unwrap_or(1.0),
            },
        })
    }

    fn build(g: &Gathered) -> Result<Option<StateSpaceModel>> {
        let canonical = g.alpha.is_some() || g.k.is_some();
        let arma = g.arma_a.is_some() || g.arma_c.is_some();
        if canonical && arma {
            return Err(Error::InvalidArgument(
                "model is over-specified: give either --alpha/--k or --arma-a/--arma-c, not both"
                    .into(),
            ));
        }
        if canonical {
            let (Some(alpha), Some(k)) = (&g.alpha, &g.k) else {
                return Err(Error::InvalidArgument(
                    "the canonical form needs both --alpha and --k".into(),
                ));
            };
            return StateSpaceModel::observer_canonical(alpha, k, g.sigma2).map(Some);
        }
        if arma {
            let a = g.arma_a.as_deref().unwrap_or_default();
            let c = g.arma_c.as_deref().unwrap_or_default();
            return arma_to_model(a, c, g.sigma2).map(Some);
        }
        Ok(None)
    }

    /// Model from flags/manifest; the benchmark ARMA(1,1) model
    /// (alpha=[0.9], k=[1.7]) when no coefficients are given.
    pub fn resolve_or_default(&self, file: &FileConfig) -> Result<StateSpaceModel> {
        let g = self.gather(file)?;
        match Self::build(&g)? {
            Some(m) => Ok(m),
            None => StateSpaceModel::observer_canonical(&[0.9], &[1.7], g.sigma2),
        }
    }

    /// Model only when coefficients were actually supplied (used for the
    /// optional ground-truth reference of `identify`).
    pub fn resolve_if_given(&self, file: &FileConfig) -> Result<Option<StateSpaceModel>> {
        Self::build(&self.gather(file)?)
    }
}

pub fn parse_weighting(s: &str) -> Result<SubspaceWeighting> {
    match s {
        "cva-like" | "cva" => Ok(SubspaceWeighting::CvaLike),
        "unweighted" => Ok(SubspaceWeighting::Unweighted),
        other => Err(Error::InvalidArgument(format!(
            "unknown weighting {other:?} (expected cva-like or unweighted)"
        ))),
    }
}
