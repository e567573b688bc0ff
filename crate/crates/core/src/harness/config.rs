//! Experiment configuration files (TOML).
//!
//! ```toml
//! methods = ["gark", "pgark"]
//! tol = 1e-8
//! out = "results/heat"
//!
//! [problem]
//! preset = "heat"
//! dx = 0.05
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{PdeConfig, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pod,
    Bt,
    Gark,
    Pgark,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Pod, Method::Bt, Method::Gark, Method::Pgark];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pod => "pod",
            Method::Bt => "bt",
            Method::Gark => "gark",
            Method::Pgark => "pgark",
        }
    }

    /// Sweeps over a list of `r` rather than iterating to tolerance.
    pub fn is_sweep(self) -> bool {
        matches!(self, Method::Pod | Method::Bt)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}; expected pod, bt, gark or pgark")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Heat,
    ConvectionDiffusion,
}

/// A preset with optional overrides, or a fully spelled-out problem.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub preset: Option<Preset>,
    pub epsilon: Option<f64>,
    pub gamma: Option<f64>,
    pub domain: Option<Rect>,
    pub omega_b: Option<Rect>,
    pub omega_c: Option<Rect>,
    pub dx: Option<f64>,
}

impl ProblemSpec {
    pub fn preset(preset: Preset) -> Self {
        Self {
            preset: Some(preset),
            ..Self::default()
        }
    }

    pub fn resolve(&self) -> Result<PdeConfig> {
        let base = match self.preset {
            Some(Preset::Heat) => Some(PdeConfig::heat()),
            Some(Preset::ConvectionDiffusion) => Some(PdeConfig::convection_diffusion()),
            None => None,
        };
        let missing = |key: &str| Error::Config(format!("problem.{key} is required without a preset"));
        let cfg = PdeConfig {
            epsilon: self.epsilon.or(base.as_ref().map(|b| b.epsilon)).ok_or_else(|| missing("epsilon"))?,
            gamma: self.gamma.or(base.as_ref().map(|b| b.gamma)).ok_or_else(|| missing("gamma"))?,
            domain: self.domain.or(base.as_ref().map(|b| b.domain)).ok_or_else(|| missing("domain"))?,
            omega_b: self.omega_b.or(base.as_ref().map(|b| b.omega_b)).ok_or_else(|| missing("omega_b"))?,
            omega_c: self.omega_c.or(base.as_ref().map(|b| b.omega_c)).ok_or_else(|| missing("omega_c"))?,
            dx: self.dx.or(base.as_ref().map(|b| b.dx)).ok_or_else(|| missing("dx"))?,
        };
        cfg.validate().map_err(|e| Error::Config(format!("problem: {e}")))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SnapshotOptions {
    pub horizon: f64,
    pub steps: usize,
}

impl Default for SnapshotOptions {
    fn default() -> Self {
        Self {
            horizon: 0.5,
            steps: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub methods: Vec<Method>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_r_max")]
    pub r_max: usize,
    /// Reduced dimensions tried by POD and BT.
    #[serde(default = "default_sweep")]
    pub sweep: Vec<usize>,
    #[serde(default)]
    pub snapshots: SnapshotOptions,
    #[serde(default)]
    pub use_b_variant: bool,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Fill the `elapsed_s` column; off by default so reruns are byte-identical.
    #[serde(default)]
    pub timings: bool,
    /// Largest `n` for which the dense reference (P, K, H2) is computed.
    #[serde(default = "default_reference_limit")]
    pub reference_limit: usize,
}

fn default_tol() -> f64 {
    1e-8
}

fn default_r_max() -> usize {
    60
}

fn default_sweep() -> Vec<usize> {
    (1..=60).map(|k| 2 * k).collect()
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

fn default_reference_limit() -> usize {
    2000
}

impl ExperimentConfig {
    pub fn new(problem: ProblemSpec, methods: Vec<Method>) -> Self {
        Self {
            problem,
            methods,
            tol: default_tol(),
            r_max: default_r_max(),
            sweep: default_sweep(),
            snapshots: SnapshotOptions::default(),
            use_b_variant: false,
            out: default_out(),
            seed: 0,
            timings: false,
            reference_limit: default_reference_limit(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config; relative `out` paths stay relative to the working directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("methods must not be empty".into()));
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(Error::Config("methods contains duplicates".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.r_max == 0 {
            return Err(Error::Config("r_max must be at least 1".into()));
        }
        if self.sweep.first() == Some(&0) || self.sweep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("sweep must be strictly increasing positive integers".into()));
        }
        if self.sweep.is_empty() && self.methods.iter().any(|m| m.is_sweep()) {
            return Err(Error::Config("pod and bt need a nonempty sweep".into()));
        }
        if !(self.snapshots.horizon > 0.0 && self.snapshots.horizon.is_finite()) || self.snapshots.steps == 0 {
            return Err(Error::Config("snapshots need horizon > 0 and steps >= 1".into()));
        }
        self.problem.resolve().map(|_| ())
    }
}

/// Parses `"0.1,0.05"` style lists.
pub fn parse_list<T: FromStr>(text: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<T>().map_err(|e| Error::Config(format!("bad list entry {s:?}: {e}"))))
        .collect()
}
