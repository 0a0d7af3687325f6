//! JSON run configuration shared by all subcommands.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use skyfade_core::correlation::{CorrelationMode, FitOptions};
use skyfade_core::fieldsim::SimConfig;
use skyfade_core::propagation::LinkBudget;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub budget: Option<LinkBudget>,
    pub ingest: IngestOptions,
    pub fit: FitOptions,
    pub eval: EvalConfig,
    pub sim: Option<SimConfig>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let config: Config =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(b) = &self.budget {
            b.validate()?;
        }
        self.ingest.validate()?;
        self.eval.validate()?;
        if let Some(s) = &self.sim {
            s.validate()?;
        }
        Ok(())
    }

    /// Link budget for decomposition; falls back to the simulation's budget.
    pub fn budget(&self) -> Result<&LinkBudget> {
        self.budget
            .as_ref()
            .or(self.sim.as_ref().map(|s| &s.budget))
            .ok_or_else(|| anyhow!("config defines no link budget (set `budget` or `sim.budget`)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestOptions {
    /// Sliding median over rsrp, in samples; odd. Off when absent.
    pub median_window: Option<usize>,
    /// External header name to canonical column name.
    pub column_map: BTreeMap<String, String>,
    pub max_invalid_fraction: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            median_window: None,
            column_map: BTreeMap::new(),
            max_invalid_fraction: 0.1,
        }
    }
}

impl IngestOptions {
    pub fn validate(&self) -> Result<()> {
        if let Some(w) = self.median_window {
            if w == 0 || w % 2 == 0 {
                bail!("median window must be a positive odd sample count, got {w}");
            }
        }
        if !(0.0..=1.0).contains(&self.max_invalid_fraction) {
            bail!("max_invalid_fraction must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub m_values: Vec<usize>,
    pub tests_per_trial: usize,
    pub total_test_predictions: usize,
    pub seed: u64,
    pub modes: Vec<CorrelationMode>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            m_values: (50..=450).step_by(50).collect(),
            tests_per_trial: 100,
            total_test_predictions: 100_000,
            seed: 0,
            modes: vec![CorrelationMode::Baseline, CorrelationMode::AngleAware],
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tests_per_trial == 0 {
            bail!("tests_per_trial must be >= 1");
        }
        if self.m_values.is_empty() || self.m_values.contains(&0) {
            bail!("m_values must be a non-empty list of counts >= 1");
        }
        if self.modes.is_empty() {
            bail!("at least one correlation mode is required");
        }
        if self.total_test_predictions == 0 {
            bail!("total_test_predictions must be >= 1");
        }
        Ok(())
    }

    pub fn trials_per_m(&self) -> usize {
        self.total_test_predictions.div_ceil(self.tests_per_trial)
    }
}
