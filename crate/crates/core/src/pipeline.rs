//! The stages composed in memory: denoise, segment and label, match, assemble.

use serde::{Deserialize, Serialize};

use crate::csv_io::{POWER, WIND_SPEED};
use crate::error::{Error, Result};
use crate::forecast::{assemble_features, rank_nwp_features, top_nwp, FeatureConfig, FeatureMatrix, History};
use crate::matching::{match_periods, MatchParams, MatchRecord};
use crate::poles::{vmd_ic, ExtremaSet, SelectionParams, VmdIcOutput};
use crate::ramp::{
    boundaries, default_rho_threshold, label_ramps, segment_at, segment_by_extrema, Definition, RampEvent,
    RampSegment, RampThresholds,
};
use crate::series::{FeatureTable, WindSeries};
use crate::vmd::VmdParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub vmd: VmdParams,
    pub selection: SelectionParams,
    pub matching: MatchParams,
    pub definition: Definition,
    /// MW threshold for the two power definitions.
    pub p_val: f64,
    /// |ρ| threshold; the 90th percentile over the training window when unset.
    pub rho_threshold: Option<f64>,
    pub lags: Vec<usize>,
    pub horizon: usize,
    /// How many of the best-correlated NWP columns to use.
    pub nwp_k: usize,
    pub ridge_lambda: f64,
    /// Chronological training fraction.
    pub split: f64,
    /// Clamp ceiling and metric capacity, MW.
    pub capacity: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            vmd: VmdParams::default(),
            selection: SelectionParams::default(),
            matching: MatchParams::default(),
            definition: Definition::Rf,
            p_val: 1.0,
            rho_threshold: None,
            lags: vec![1, 2, 3],
            horizon: 4,
            nwp_k: 2,
            ridge_lambda: 0.1,
            split: 0.7,
            capacity: 5.0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.vmd.validate()?;
        self.selection.validate()?;
        self.features(true, true, Vec::new()).validate()?;
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.p_val > 0.0) {
            return bad(format!("p_val must be positive, got {}", self.p_val));
        }
        if let Some(r) = self.rho_threshold {
            if !(r > 0.0) {
                return bad(format!("rho_threshold must be positive, got {r}"));
            }
        }
        if !(self.ridge_lambda >= 0.0) {
            return bad(format!("ridge_lambda must be ≥ 0, got {}", self.ridge_lambda));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return bad(format!("split must lie in (0, 1), got {}", self.split));
        }
        if !(self.capacity > 0.0) {
            return bad(format!("capacity must be positive, got {}", self.capacity));
        }
        if !(self.matching.dt > 0.0) {
            return bad(format!("matching dt must be positive, got {}", self.matching.dt));
        }
        Ok(())
    }

    pub fn features(&self, match_features: bool, ramp_features: bool, nwp: Vec<String>) -> FeatureConfig {
        FeatureConfig {
            lags: self.lags.clone(),
            horizon: self.horizon,
            nwp,
            match_features,
            ramp_features,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RampStage {
    /// Segments of the denoised speed.
    pub segments: Vec<RampSegment>,
    /// The same boundaries on the power series.
    pub power_segments: Vec<RampSegment>,
    pub events: Vec<RampEvent>,
    pub rho_threshold: f64,
}

/// Segment the denoised speed at its selected poles and label every segment.
pub fn ramp_stage(
    recon: &WindSeries,
    extrema: &ExtremaSet,
    power: &WindSeries,
    config: &PipelineConfig,
) -> Result<RampStage> {
    if !recon.same_clock(power) || recon.len() != power.len() {
        return Err(Error::AlignmentError("speed and power series are not on one clock".into()));
    }
    let segments = segment_by_extrema(recon, extrema)?;
    let power_segments = segment_at(power, &boundaries(recon.len(), extrema))?;
    let rho_threshold = match config.rho_threshold {
        Some(r) => r,
        None => {
            let cut = (recon.len() as f64 * config.split) as usize;
            let train: Vec<RampSegment> = segments.iter().filter(|s| s.end_idx < cut).cloned().collect();
            let t = default_rho_threshold(if train.is_empty() { &segments } else { &train })?;
            t.max(f64::MIN_POSITIVE)
        }
    };
    let thresholds = RampThresholds {
        p_val: config.p_val,
        rho: rho_threshold,
    };
    let labelled = match config.definition {
        Definition::Rf => &segments,
        _ => &power_segments,
    };
    let events = label_ramps(labelled, &thresholds, config.definition)?;
    Ok(RampStage {
        segments,
        power_segments,
        events,
        rho_threshold,
    })
}

/// Everything upstream of the feature matrix.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub denoised: VmdIcOutput,
    pub history_denoised: VmdIcOutput,
    pub ramps: RampStage,
    pub matches: Vec<MatchRecord>,
    pub nwp: Vec<String>,
    pub table: FeatureTable,
    pub history: FeatureTable,
}

impl Prepared {
    pub fn features(&self, config: &PipelineConfig, match_features: bool, ramp_features: bool) -> Result<FeatureMatrix> {
        let history = History {
            speed: self.history.require(WIND_SPEED)?.values(),
            power: self.history.require(POWER)?.values(),
        };
        assemble_features(
            &self.matches,
            &self.ramps.events,
            &self.table,
            Some(history),
            &config.features(match_features, ramp_features, self.nwp.clone()),
        )
    }
}

/// Run every stage up to feature assembly; the historical speed is denoised
/// the same way before matching.
pub fn prepare(table: &FeatureTable, history: &FeatureTable, config: &PipelineConfig) -> Result<Prepared> {
    config.validate()?;
    let speed = table.require(WIND_SPEED)?;
    let power = table.require(POWER)?;
    let denoised = vmd_ic(speed, &config.vmd, &config.selection)?;
    let history_denoised = vmd_ic(history.require(WIND_SPEED)?, &config.vmd, &config.selection)?;
    history.require(POWER)?;
    let ramps = ramp_stage(&denoised.recon, &denoised.extrema, power, config)?;
    let matches = match_periods(&ramps.segments, history_denoised.recon.values(), &config.matching)?;
    let nwp = top_nwp(&rank_nwp_features(table, POWER)?, config.nwp_k);
    Ok(Prepared {
        denoised,
        history_denoised,
        ramps,
        matches,
        nwp,
        table: table.clone(),
        history: history.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_history, synth_scenario, ScenarioConfig};

    fn scenario() -> ScenarioConfig {
        serde_json::from_value(serde_json::json!({
            "length": 480,
            "base_mean": 8.0,
            "reversion": 0.05,
            "noise_sigma": 0.3,
            "history_length": 600,
            "events": [{"start": 200, "duration": 12, "magnitude": 5.0, "direction": "up", "hold": 20}]
        }))
        .unwrap()
    }

    #[test]
    fn config_defaults_fill_partial_json() {
        let c: PipelineConfig = serde_json::from_str(r#"{"horizon": 2, "vmd": {"k": 4}}"#).unwrap();
        assert_eq!(c.horizon, 2);
        assert_eq!(c.vmd.k, 4);
        assert_eq!(c.vmd.alpha, VmdParams::default().alpha);
        assert!(c.validate().is_ok());
        let bad = PipelineConfig {
            split: 1.5,
            ..PipelineConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn prepare_then_assemble() {
        let cfg = scenario();
        let s = synth_scenario(&cfg, 5).unwrap();
        let h = synth_history(&cfg, 5).unwrap();
        let pc = PipelineConfig::default();
        let p = prepare(&s.table, &h.table, &pc).unwrap();
        assert_eq!(p.matches.len(), p.ramps.segments.len());
        assert_eq!(p.ramps.events.len(), p.ramps.segments.len());
        assert!(p.ramps.events.iter().any(|e| e.fired));
        let full = p.features(&pc, true, true).unwrap();
        let bare = p.features(&pc, false, false).unwrap();
        assert_eq!(full.n_rows(), bare.n_rows());
        assert_eq!(full.n_features(), bare.n_features() + 5);
        assert!(p.nwp.len() <= 2);
        let again = prepare(&s.table, &h.table, &pc).unwrap();
        assert_eq!(again.features(&pc, true, true).unwrap(), full);
    }
}
