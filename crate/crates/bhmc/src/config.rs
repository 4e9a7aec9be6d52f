//! Run configuration for `fit`.

use std::path::{Path, PathBuf};

use bhmc_core::{Hyperparams, SamplerConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::read_file;

/// Model constants as written in a config file. `mu0` and `sigma0_diag`
/// default to zeros and ones once the data dimension is known.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperparamsConfig {
    pub alpha: f64,
    pub gamma0: f64,
    pub gamma: f64,
    pub sigma2: f64,
    pub mu0: Option<Vec<f64>>,
    pub sigma0_diag: Option<Vec<f64>>,
    pub levels: usize,
    pub epsilon: f64,
}

impl Default for HyperparamsConfig {
    fn default() -> Self {
        let p = Hyperparams::animals_profile(0);
        HyperparamsConfig {
            alpha: p.alpha,
            gamma0: p.gamma0,
            gamma: p.gamma,
            sigma2: p.sigma2,
            mu0: None,
            sigma0_diag: None,
            levels: p.levels,
            epsilon: p.epsilon,
        }
    }
}

impl HyperparamsConfig {
    pub fn resolve(&self, dim: usize) -> Result<Hyperparams> {
        let hp = Hyperparams {
            alpha: self.alpha,
            gamma0: self.gamma0,
            gamma: self.gamma,
            sigma2: self.sigma2,
            mu0: self.mu0.clone().unwrap_or_else(|| vec![0.0; dim]),
            sigma0_diag: self.sigma0_diag.clone().unwrap_or_else(|| vec![1.0; dim]),
            levels: self.levels,
            epsilon: self.epsilon,
        };
        hp.validate()?;
        if hp.dim() != dim {
            return Err(CliError::Config(format!("mu0 has {} entries but the data has {dim} columns", hp.dim())));
        }
        Ok(hp)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: PathBuf,
    #[serde(default)]
    pub has_header: bool,
    #[serde(default)]
    pub pca_dim: Option<usize>,
    #[serde(default)]
    pub standardize: bool,
    #[serde(default)]
    pub hyperparams: HyperparamsConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    pub output_dir: PathBuf,
    #[serde(default = "one")]
    pub chains: usize,
    /// Ground-truth export; when present `fit` also writes `metrics.json`.
    #[serde(default)]
    pub truth: Option<PathBuf>,
    /// Levels to evaluate against the truth; defaults to `levels + 1`.
    #[serde(default)]
    pub eval_levels: Option<usize>,
    /// Component summaries kept per node in `tree.json`.
    #[serde(default = "default_top")]
    pub top_components: usize,
}

fn one() -> usize {
    1
}

fn default_top() -> usize {
    5
}

impl RunConfig {
    /// Parse a config file. Relative paths are taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_file(path)?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.to_owned(), source })?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.input = base.join(&cfg.input);
        cfg.output_dir = base.join(&cfg.output_dir);
        cfg.truth = cfg.truth.map(|t| base.join(t));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(CliError::Config("chains must be at least 1".into()));
        }
        if self.pca_dim == Some(0) {
            return Err(CliError::Config("pca_dim must be at least 1".into()));
        }
        self.sampler.validate()?;
        Ok(())
    }
}
