//! Experiment configuration files.
//!
//! TOML with nested tables for the scenario and scheduler blocks; unknown
//! keys are rejected. A minimal config needs a scenario and a seed list:
//!
//! ```toml
//! seeds = [1, 2, 3]
//!
//! [scenario]
//! preset = "two_task_paper_like"
//!
//! [[schedulers]]
//! kind = "fair"
//!
//! [[schedulers]]
//! kind = "static"
//! lambda = 0.0
//! ```
//!
//! Omitting `schedulers` entirely selects the standard comparison set
//! (all-LM, 10% MT, 50/50, warmup, exp3, fair). Scenarios are either a
//! shipped `preset` by name or an inline environment/stationary table.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bandit::SchedulerConfig;
use crate::env::{EnvConfig, Scenario, StationaryConfig};
use crate::error::{Error, Result};

fn default_true() -> bool {
    true
}

fn default_steps() -> u64 {
    50_000
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("curriculum_out")
}

/// Which trajectory formats to write. CSV or JSON must stay enabled so the
/// comparison report remains recomputable from disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitFlags {
    #[serde(default = "default_true")]
    pub csv: bool,
    #[serde(default)]
    pub json: bool,
    #[serde(default)]
    pub svg: bool,
}

impl Default for EmitFlags {
    fn default() -> Self {
        Self {
            csv: true,
            json: false,
            svg: false,
        }
    }
}

/// Scenario block of a config file: a preset reference or an inline table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSpec {
    Preset { preset: String },
    Env(EnvConfig),
    Stationary(StationaryConfig),
}

impl ScenarioSpec {
    pub fn resolve(&self) -> Result<Scenario> {
        let scenario = match self {
            ScenarioSpec::Preset { preset } => Scenario::preset(preset)?,
            ScenarioSpec::Env(cfg) => Scenario::Env(cfg.clone()),
            ScenarioSpec::Stationary(cfg) => Scenario::Stationary(cfg.clone()),
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// A full experiment: one scenario, a set of schedulers to compare, a seed
/// list, and output settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSpec,
    #[serde(default = "SchedulerConfig::comparison_set")]
    pub schedulers: Vec<SchedulerConfig>,
    #[serde(default = "default_steps")]
    pub steps: u64,
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub emit: EmitFlags,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schedulers.is_empty() {
            return Err(Error::InvalidConfig("schedulers must not be empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seeds must not be empty".into()));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return Err(Error::InvalidConfig("seeds must be distinct".into()));
        }
        if self.steps == 0 {
            return Err(Error::InvalidConfig("steps must be >= 1".into()));
        }
        if !self.emit.csv && !self.emit.json {
            return Err(Error::InvalidConfig(
                "emit must keep csv or json enabled so the report stays recomputable".into(),
            ));
        }
        let scenario = self.scenario.resolve()?;
        let n_arms = scenario.n_arms();
        for scheduler in &self.schedulers {
            scheduler.build(n_arms)?;
        }
        Ok(())
    }

    pub fn resolve_scenario(&self) -> Result<Scenario> {
        self.scenario.resolve()
    }
}

/// Read and validate a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let config: ExperimentConfig = toml::from_str(&text).map_err(|e| Error::ConfigParse {
        path: path.into(),
        source: Box::new(e),
    })?;
    config.validate()?;
    Ok(config)
}
