//! Run configuration shared by the CLI commands.

use crate::error::CoreError;
use crate::model::EnergySystem;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Monolithic,
    Benders,
}

/// Import-flexibility presets from current supply-contract terms:
/// `reference` allows 10% extra at a 20% markup, `high` 30% at 5%,
/// `inflexible` pins imports to the baseline, and `none` removes import
/// contracts entirely.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImportPreset {
    Reference,
    None,
    Inflexible,
    High,
}

impl ImportPreset {
    /// `(theta, markup on nu_base)`; `None` removes the contracts.
    pub fn terms(self) -> Option<(f64, f64)> {
        match self {
            ImportPreset::Reference => Some((0.10, 1.20)),
            ImportPreset::None => None,
            ImportPreset::Inflexible => Some((0.0, 1.0)),
            ImportPreset::High => Some((0.30, 1.05)),
        }
    }

    /// Rewrite the system's contracts according to the preset.
    pub fn apply(self, system: &mut EnergySystem) {
        match self.terms() {
            None => system.contracts.clear(),
            Some((theta, markup)) => {
                for contract in &mut system.contracts {
                    contract.theta = theta;
                    contract.nu_flex = contract.nu_base * markup;
                }
            }
        }
    }
}

fn default_n() -> usize {
    15
}
fn default_gap() -> f64 {
    0.005
}
fn default_workers() -> usize {
    1
}
fn default_true() -> bool {
    true
}
fn default_alpha() -> f64 {
    0.01
}
fn default_one() -> f64 {
    1.0
}
fn default_max_iterations() -> usize {
    200
}
fn default_runs() -> usize {
    200
}
fn default_years() -> usize {
    100
}
fn default_method() -> SolveMethod {
    SolveMethod::Benders
}
fn default_preset() -> ImportPreset {
    ImportPreset::Reference
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub system: PathBuf,
    pub sample: PathBuf,
    pub output: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteringConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub n_ext: usize,
    /// Reference capacities in MW per technology; when absent, a
    /// deterministic solve of the first sample year provides them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_capacities: Option<BTreeMap<String, f64>>,
    /// Also sweep n and write the clustering error curve.
    #[serde(default)]
    pub error_curve: bool,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig {
            n: default_n(),
            n_ext: 0,
            reference_capacities: None,
            error_curve: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    #[serde(default = "default_method")]
    pub method: SolveMethod,
    #[serde(default = "default_gap")]
    pub gap: f64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_true")]
    pub multi_year: bool,
    #[serde(default = "default_preset")]
    pub import_flexibility: ImportPreset,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_one")]
    pub beta: f64,
    #[serde(default = "default_one")]
    pub gamma: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_true")]
    pub stabilization: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            method: default_method(),
            gap: default_gap(),
            workers: default_workers(),
            multi_year: true,
            import_flexibility: default_preset(),
            alpha: default_alpha(),
            beta: 1.0,
            gamma: 1.0,
            max_iterations: default_max_iterations(),
            stabilization: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_years")]
    pub years: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            runs: default_runs(),
            years: default_years(),
            seed: None,
            workers: default_workers(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub paths: PathsConfig,
    /// Master seed; all randomness in the pipeline derives from it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub clustering: ClusteringConfig,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
}

impl RunConfig {
    pub fn simulate_seed(&self) -> u64 {
        self.simulate.seed.unwrap_or(self.seed)
    }
}

/// Parse a run configuration from TOML text; exposed for fuzzing.
pub fn parse_run_config(text: &str) -> Result<RunConfig, CoreError> {
    let config: RunConfig =
        toml::from_str(text).map_err(|e| CoreError::schema("run config", e.to_string()))?;
    if config.clustering.n == 0 {
        return Err(CoreError::schema("clustering.n", "must be positive"));
    }
    if config.clustering.n_ext % 2 != 0 {
        return Err(CoreError::OddExtremeCount(config.clustering.n_ext));
    }
    if !(config.solve.gap >= 0.0) {
        return Err(CoreError::schema("solve.gap", "must be nonnegative"));
    }
    if !(config.solve.alpha > 0.0 && config.solve.alpha <= 1.0) {
        return Err(CoreError::schema("solve.alpha", "must lie in (0, 1]"));
    }
    if config.solve.beta < 0.0 || config.solve.gamma < 0.0 {
        return Err(CoreError::schema("solve.beta/gamma", "must be nonnegative"));
    }
    if config.simulate.runs == 0 || config.simulate.years == 0 {
        return Err(CoreError::schema("simulate", "runs and years must be positive"));
    }
    Ok(config)
}

pub fn load_run_config(path: &Path) -> Result<RunConfig, CoreError> {
    let text = std::fs::read_to_string(path)
        .map_err(|_| CoreError::MissingFile(path.display().to_string()))?;
    parse_run_config(&text)
}
