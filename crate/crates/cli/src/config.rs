//! Run configuration: TOML parsing, defaults, and validation.
//!
//! Omitted grids and budgets fall back to the scenario's defaults; unknown
//! keys are rejected with the offending key named. Validation errors name
//! the failing field.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use adaptlab_core::scenarios::Overrides;

use crate::error::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub x0: Option<usize>,
    pub theta0: Option<f64>,
}

impl ConfigOverrides {
    pub fn to_core(self) -> Overrides {
        Overrides {
            x0: self.x0,
            theta0: self.theta0,
        }
    }
}

/// A diagnostic run request. `None` grid/budget fields resolve to the
/// scenario defaults at run time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_grid: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<u32>,
    /// Start of the supremum window; defaults to max(n_grid) / 4.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_burn: Option<u64>,
    #[serde(default = "default_delta_star")]
    pub delta_star: f64,
    #[serde(default = "default_eta_star")]
    pub eta_star: f64,
    #[serde(default = "default_parallel")]
    pub parallel: bool,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
    #[serde(default)]
    pub overrides: ConfigOverrides,
}

fn default_seed() -> u64 {
    1729
}

fn default_delta_star() -> f64 {
    0.05
}

fn default_eta_star() -> f64 {
    0.01
}

fn default_parallel() -> bool {
    true
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Json, OutputFormat::Csv]
}

impl RunConfig {
    pub fn minimal(scenario: &str) -> Self {
        Self {
            scenario: scenario.into(),
            seed: default_seed(),
            eps: None,
            n_grid: None,
            m_grid: None,
            cap: None,
            replicates: None,
            n_burn: None,
            delta_star: default_delta_star(),
            eta_star: default_eta_star(),
            parallel: default_parallel(),
            out_dir: default_out_dir(),
            formats: default_formats(),
            overrides: ConfigOverrides::default(),
        }
    }

    pub fn to_toml(&self) -> Result<String, RunError> {
        toml::to_string(self).map_err(|e| RunError::Config(e.to_string()))
    }
}

/// Parse a TOML config; unknown keys are rejected with the key named.
pub fn parse_config(source: &str) -> Result<RunConfig, RunError> {
    let config: RunConfig = toml::from_str(source).map_err(|e| RunError::Config(e.to_string()))?;
    Ok(config)
}

fn fail(field: &str, detail: &str) -> RunError {
    RunError::Config(format!("{field}: {detail}"))
}

/// Validate the fully resolved grids and budgets (after scenario defaults
/// have been merged in).
#[allow(clippy::too_many_arguments)]
pub fn validate_resolved(
    eps: &[f64],
    n_grid: &[u64],
    m_grid: &[u64],
    cap: u64,
    replicates: u32,
    n_burn: u64,
    delta_star: f64,
    eta_star: f64,
    formats: &[OutputFormat],
) -> Result<(), RunError> {
    if eps.is_empty() || eps.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(fail("eps", "every value must lie in (0, 1)"));
    }
    for (name, grid) in [("n_grid", n_grid), ("m_grid", m_grid)] {
        if grid.is_empty() {
            return Err(fail(name, "must be nonempty"));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(fail(name, "must be strictly increasing"));
        }
    }
    if cap < *m_grid.last().expect("nonempty") {
        return Err(fail("cap", "must be at least the largest m_grid threshold"));
    }
    if replicates < 1 {
        return Err(fail("replicates", "must be at least 1"));
    }
    if n_burn > *n_grid.last().expect("nonempty") {
        return Err(fail("n_burn", "must not exceed the largest n_grid entry"));
    }
    if !(delta_star > 0.0 && delta_star < 1.0) {
        return Err(fail("delta_star", "must lie in (0, 1)"));
    }
    if eta_star <= 0.0 {
        return Err(fail("eta_star", "must be positive"));
    }
    if formats.is_empty() {
        return Err(fail("formats", "must name at least one of json, csv"));
    }
    Ok(())
}
