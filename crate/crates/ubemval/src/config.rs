//! Run configuration.
//!
//! One TOML file drives every command. Flags override the file and the file
//! overrides built-in defaults. A top-level `seed` overrides both
//! `synth.seed` and `experiment.seed`. A `report.json` written by
//! `experiment` is accepted too; its `config` object is read back.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ubemval_core::cleanse::CleanseConfig;
use ubemval_core::harness::ExperimentConfig;
use ubemval_core::synth::SynthConfig;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensitivityConfig {
    /// Fraction of the ensemble whose mean is compared with the measurement.
    pub best_fraction: f64,
    /// Quantile bins per variable of the mutual-information histogram.
    pub bins: usize,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self {
            best_fraction: 0.05,
            bins: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; when set it replaces the synth and experiment seeds.
    pub seed: Option<u64>,
    /// Input dataset directory.
    pub data: Option<PathBuf>,
    /// Output directory.
    pub out: Option<PathBuf>,
    /// Worker threads, 0 for one per core.
    pub jobs: usize,
    pub synth: SynthConfig,
    pub cleanse: CleanseConfig,
    pub experiment: ExperimentConfig,
    pub sensitivity: SensitivityConfig,
}

fn config_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

impl RunConfig {
    /// Reads a TOML file, or the `config` object of a JSON report.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| config_err(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| config_err(path, e))?;
            let inner = value.get_mut("config").map(serde_json::Value::take).unwrap_or(value);
            serde_json::from_value(inner).map_err(|e| config_err(path, e))
        } else {
            toml::from_str(&text).map_err(|e| config_err(path, e))
        }
    }

    /// Propagates the master seed into the sections that draw randomness.
    pub fn apply_seed(&mut self) {
        if let Some(seed) = self.seed {
            self.synth.seed = seed;
            self.experiment.seed = seed;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let core = |e: ubemval_core::Error| CliError::Config(e.to_string());
        self.synth.validate().map_err(core)?;
        self.experiment.validate().map_err(core)?;
        let c = &self.cleanse;
        if !(c.sigma_k > 0.0) {
            return Err(CliError::Config("cleanse.sigma_k: must be positive".into()));
        }
        if !(c.min_distinct_ratio > 0.0 && c.min_distinct_ratio <= 1.0) {
            return Err(CliError::Config("cleanse.min_distinct_ratio: must lie in (0, 1]".into()));
        }
        if c.malfunction_min_run == 0 {
            return Err(CliError::Config("cleanse.malfunction_min_run: must be at least 1".into()));
        }
        if c.manual.iter().any(|(a, b)| a > b) {
            return Err(CliError::Config("cleanse.manual: each period must start before it ends".into()));
        }
        let s = &self.sensitivity;
        if !(s.best_fraction > 0.0 && s.best_fraction <= 1.0) {
            return Err(CliError::Config("sensitivity.best_fraction: must lie in (0, 1]".into()));
        }
        if s.bins < 2 {
            return Err(CliError::Config("sensitivity.bins: must be at least 2".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("configuration serialises")
    }
}
