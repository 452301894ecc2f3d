//! Run configuration: an optional JSON file, then command-line overrides.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use rampkit_core::pipeline::PipelineConfig;
use rampkit_core::synth::{RampDirection, RampEventSpec, ScenarioConfig};
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    /// Ridge over lags, NWP, ramp and match features.
    #[default]
    Ridge,
    /// Ridge over lags and NWP only.
    RidgeBare,
    Persistence,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Ridge => "ridge",
            Model::RidgeBare => "ridge-bare",
            Model::Persistence => "persistence",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub scenario: ScenarioConfig,
    pub pipeline: PipelineConfig,
    pub model: Model,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            scenario: default_scenario(),
            pipeline: PipelineConfig::default(),
            model: Model::default(),
        }
    }
}

/// Ten days of 15-minute data with four ramps and a 20-day history.
pub fn default_scenario() -> ScenarioConfig {
    let event = |start, duration, magnitude, direction, hold| RampEventSpec {
        start,
        duration,
        magnitude,
        direction,
        hold: Some(hold),
    };
    ScenarioConfig {
        length: 960,
        step_s: 900,
        base_mean: 8.5,
        reversion: 0.03,
        noise_sigma: 0.25,
        events: vec![
            event(150, 10, 5.0, RampDirection::Up, 20),
            event(380, 12, 4.5, RampDirection::Down, 16),
            event(600, 8, 6.0, RampDirection::Up, 24),
            event(820, 14, 5.5, RampDirection::Down, 12),
        ],
        measurement_sigma: 0.3,
        nwp_sigma: 1.5,
        start_time: chrono::DateTime::UNIX_EPOCH,
        power_curve: None,
        history_length: Some(1920),
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let raw = fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&raw)
            .map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())).into())
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate().context("scenario")?;
        self.pipeline.validate().context("pipeline")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn partial_json_keeps_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"seed": 3, "pipeline": {"horizon": 2}, "model": "ridge-bare"}"#).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.pipeline.horizon, 2);
        assert_eq!(c.model, Model::RidgeBare);
        assert_eq!(c.scenario, default_scenario());
    }

    #[test]
    fn negative_length_is_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"scenario": {"length": -5}}"#).is_err());
    }
}
