//! Run configuration: one JSON document, unknown keys rejected.

use std::path::{Path, PathBuf};

use advcert_core::model::KernelSpec;
use advcert_core::regions::{ApproxSpec, RegionSpec};
use advcert_core::svr::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{usage, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Train,
    Certify,
    SweepLambda,
    Ood,
    Validate,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Train => "train",
            Task::Certify => "certify",
            Task::SweepLambda => "sweep-lambda",
            Task::Ood => "ood",
            Task::Validate => "validate",
        }
    }
}

/// Where the training data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// CSV file with header `u1,...,ud,y`.
    Csv { path: PathBuf },
    /// Noisy sinc samples on `[-5, 5]`.
    Sinc {
        n: usize,
        #[serde(default = "one")]
        noise_scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OodConfig {
    pub mu: f64,
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    pub n_fresh: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    pub data: DataSource,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(default = "singleton")]
    pub region: RegionSpec,
    #[serde(default = "center_only")]
    pub approx: ApproxSpec,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ood: Option<OodConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationConfig>,
    #[serde(default = "default_resolution")]
    pub grid_resolution: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn singleton() -> RegionSpec {
    RegionSpec::Singleton
}

fn center_only() -> ApproxSpec {
    ApproxSpec::CenterOnly
}

fn default_resolution() -> usize {
    64
}

impl RunConfig {
    /// Reads a config; relative data paths resolve against the config's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        if let DataSource::Csv { path: p } = &mut cfg.data {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return usage("beta must lie in (0, 1)");
        }
        self.train.validate()?;
        self.region.validate()?;
        if let Some(k) = &self.kernel {
            k.validate()?;
        }
        if self.grid_resolution < 3 {
            return usage("grid_resolution must be at least 3");
        }
        match &self.data {
            DataSource::Csv { path } => {
                if !path.exists() {
                    return Err(CliError::Io(format!("data file not found: {}", path.display())));
                }
            }
            DataSource::Sinc { n, noise_scale } => {
                if *n == 0 {
                    return usage("sinc generator needs n >= 1");
                }
                if !(*noise_scale >= 0.0 && noise_scale.is_finite()) {
                    return usage("noise_scale must be non-negative");
                }
            }
        }
        if let Some(grid) = &self.lambda_grid {
            if grid.iter().any(|l| !(*l >= 0.0 && l.is_finite())) || grid.windows(2).any(|w| !(w[0] <= w[1])) {
                return usage("lambda_grid must be non-negative and ascending");
            }
        }
        if let Some(o) = &self.ood {
            if !(o.mu > 0.0) || o.radii.is_empty() || o.radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
                return usage("ood needs mu > 0 and a non-empty grid of positive radii");
            }
        }
        if let Some(v) = &self.validation {
            if v.n_fresh < crate::validate::MIN_FRESH {
                return usage(format!("validation.n_fresh must be at least {}", crate::validate::MIN_FRESH));
            }
        }
        Ok(())
    }

    /// SHA-256 of the effective configuration, output path excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        c.task = None;
        hash_json(&c)
    }
}

pub fn hash_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("configuration serializes");
    hex::encode(Sha256::digest(&bytes))
}
