use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use adagrad_lab::optimizers::Method;
use adagrad_lab::problems::{self, BuildContext, Problem};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

/// One experiment grid: every (eta, seed) pair is an independent cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    /// `norm`, `coordinate` or `rr`.
    pub method: String,
    pub eta_grid: Vec<f64>,
    /// Checkpoints; the last one is the run length.
    pub horizons: Vec<u64>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub output_dir: PathBuf,
    #[serde(default = "default_stride")]
    pub trace_stride: u64,
    #[serde(default = "default_nu0")]
    pub nu0: f64,
}

fn default_delta() -> f64 {
    0.5
}

fn default_stride() -> u64 {
    1
}

fn default_nu0() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn method(&self) -> Result<Method> {
        Ok(self.method.parse()?)
    }

    pub fn horizon(&self) -> u64 {
        self.horizons.last().copied().unwrap_or(0)
    }

    /// Builds the problem for one learning rate of the grid.
    pub fn build_problem(&self, eta: f64) -> Result<Box<dyn Problem>> {
        let ctx = BuildContext { eta, horizon: self.horizon() as usize };
        Ok(problems::build(&self.problem.name, &self.problem.params, &ctx)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.eta_grid.is_empty() {
            return bad("eta_grid must not be empty".into());
        }
        if self.horizons.is_empty() {
            return bad("horizons must not be empty".into());
        }
        if let Some(eta) = self.eta_grid.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return bad(format!("eta_grid entries must be positive, got {eta}"));
        }
        if self.horizons[0] == 0 {
            return bad("horizons must be positive".into());
        }
        if self.horizons.windows(2).any(|p| p[1] <= p[0]) {
            return bad(format!("horizons must be strictly increasing, got {:?}", self.horizons));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|p| p[0] == p[1]) {
            return bad("seeds must be distinct".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if self.trace_stride == 0 {
            return bad("trace_stride must be positive".into());
        }
        if !(self.nu0 > 0.0 && self.nu0.is_finite()) {
            return bad(format!("nu0 must be positive, got {}", self.nu0));
        }
        let method = self.method()?;
        for &eta in &self.eta_grid {
            let p = self.build_problem(eta)?;
            if method == Method::Rr && p.num_components().is_none() {
                return bad(format!("method rr needs a finite-sum problem, `{}` is not one", p.name()));
            }
        }
        Ok(())
    }
}
