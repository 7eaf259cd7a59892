//! Scenario files: one TOML document per experiment.

use std::path::{Path, PathBuf};

use kactree::{FixedPointConfig, InitialLaw, KernelSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    pub gamma: f64,
    /// Wasserstein exponent for `rate`.
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub times: Vec<f64>,
    /// Draws per time point.
    #[serde(default = "default_count")]
    pub count: usize,
    /// Zero means one worker per core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub kernel: KernelSpec,
    pub initial: InitialLaw,
    #[serde(default)]
    pub fixed_point: FixedPointConfig,
    #[serde(default)]
    pub spectral: SpectralSettings,
    #[serde(default)]
    pub wild: WildSettings,
    #[serde(default)]
    pub degenerate: DegenerateSettings,
    #[serde(default)]
    pub tree: TreeSettings,
}

fn default_count() -> usize {
    10_000
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralSettings {
    pub s_min: f64,
    pub s_max: f64,
    pub points: usize,
}

impl Default for SpectralSettings {
    fn default() -> Self {
        SpectralSettings { s_min: 0.05, s_max: 8.0, points: 160 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WildSettings {
    pub xi: Vec<f64>,
    pub truncation: usize,
}

impl Default for WildSettings {
    fn default() -> Self {
        WildSettings { xi: vec![0.5, 1.0, 2.0], truncation: kactree::wild::DEFAULT_TRUNCATION }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegenerateSettings {
    pub threshold: f64,
}

impl Default for DegenerateSettings {
    fn default() -> Self {
        DegenerateSettings { threshold: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeSettings {
    /// Tree sizes for the weight statistics.
    pub sizes: Vec<usize>,
    pub count: usize,
    /// Shape laws are tabulated for every `k <= max_shape_size`.
    pub max_shape_size: usize,
    pub dirichlet_size: usize,
}

impl Default for TreeSettings {
    fn default() -> Self {
        TreeSettings { sizes: vec![5, 20, 100], count: 10_000, max_shape_size: 4, dirichlet_size: 10_000 }
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let s: Scenario = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.gamma > 0.0 && self.gamma <= 2.0) {
            return bad(format!("gamma must lie in (0, 2], got {}", self.gamma));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return bad(format!("delta must be positive, got {d}"));
            }
        }
        if self.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return bad("times must be finite and nonnegative".into());
        }
        if self.times.windows(2).any(|w| w[0] >= w[1]) {
            return bad("times must be strictly increasing".into());
        }
        if self.count == 0 || self.tree.count == 0 {
            return bad("counts must be at least 1".into());
        }
        if self.spectral.points < 2 || !(self.spectral.s_min > 0.0 && self.spectral.s_min < self.spectral.s_max) {
            return bad("spectral grid needs 0 < s_min < s_max and at least 2 points".into());
        }
        self.kernel.check()?;
        self.initial.check()?;
        Ok(())
    }

    /// SHA-256 of the effective scenario (after overrides) in canonical TOML.
    /// The output directory is left out so relocated runs hash the same.
    pub fn hash(&self) -> Result<String, CliError> {
        let text = toml::to_string(&Scenario { output_dir: PathBuf::new(), ..self.clone() })
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(hex::encode(Sha256::digest(text.as_bytes())))
    }
}
