//! Synthetic wind scenarios: a mean-reverting base speed with piecewise-linear
//! ramp injections, the derived power column and noisy NWP covariates.

use chrono::{DateTime, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::csv_io::{POWER, WIND_SPEED};
use crate::error::{Error, Result};
use crate::series::{power_curve, FeatureTable, PowerCurveSpec, SeriesKind, WindSeries};

pub const NWP_SPEED: &str = "nwp_speed_70m";
pub const NWP_TEMPERATURE: &str = "nwp_temperature_70m";

/// Mixed into the seed for history generation so the history never shares noise
/// with the scenario drawn from the same seed.
const HISTORY_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RampDirection {
    Up,
    Down,
}

impl RampDirection {
    pub fn sign(self) -> f64 {
        match self {
            RampDirection::Up => 1.0,
            RampDirection::Down => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampEventSpec {
    pub start: usize,
    pub duration: usize,
    /// Speed change in m/s, applied in `direction`.
    pub magnitude: f64,
    pub direction: RampDirection,
    /// Steps to hold the shifted level before ramping back. `None` keeps the shift.
    #[serde(default)]
    pub hold: Option<usize>,
}

fn default_step() -> i64 {
    900
}
fn default_nwp_sigma() -> f64 {
    0.8
}
fn default_start() -> DateTime<Utc> {
    DateTime::UNIX_EPOCH
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub length: usize,
    #[serde(default = "default_step")]
    pub step_s: i64,
    /// Long-run mean of the base speed process, m/s.
    pub base_mean: f64,
    /// Mean-reversion rate per step, in [0, 1].
    pub reversion: f64,
    /// Standard deviation of the base process innovations, m/s.
    pub noise_sigma: f64,
    #[serde(default)]
    pub events: Vec<RampEventSpec>,
    /// White measurement noise added on top of the base process, m/s.
    #[serde(default)]
    pub measurement_sigma: f64,
    /// Error of the synthetic NWP speed forecast, m/s.
    #[serde(default = "default_nwp_sigma")]
    pub nwp_sigma: f64,
    #[serde(default = "default_start")]
    pub start_time: DateTime<Utc>,
    #[serde(default)]
    pub power_curve: Option<PowerCurveSpec>,
    /// Length of the companion historical series, when one is wanted.
    #[serde(default)]
    pub history_length: Option<usize>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.length == 0 {
            return fail("length must be positive".into());
        }
        if self.step_s <= 0 {
            return fail(format!("step_s must be positive, got {}", self.step_s));
        }
        if !(0.0..=1.0).contains(&self.reversion) {
            return fail(format!("reversion must lie in [0, 1], got {}", self.reversion));
        }
        for (name, v) in [
            ("base_mean", self.base_mean),
            ("noise_sigma", self.noise_sigma),
            ("measurement_sigma", self.measurement_sigma),
            ("nwp_sigma", self.nwp_sigma),
        ] {
            if !v.is_finite() || v < 0.0 {
                return fail(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if self.history_length == Some(0) {
            return fail("history_length must be positive".into());
        }
        for (i, e) in self.events.iter().enumerate() {
            if e.duration == 0 {
                return fail(format!("event {i}: duration must be positive"));
            }
            if e.start >= self.length {
                return fail(format!("event {i}: start {} beyond length", e.start));
            }
            if !(e.magnitude.is_finite() && e.magnitude > 0.0) {
                return fail(format!("event {i}: magnitude must be positive"));
            }
        }
        Ok(())
    }

    pub fn curve(&self) -> PowerCurveSpec {
        self.power_curve.unwrap_or_default()
    }
}

/// Ground truth for one injected ramp: indices `start..=end` cover the slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampAnnotation {
    pub start: usize,
    pub end: usize,
    pub start_time: DateTime<Utc>,
    pub end_time: DateTime<Utc>,
    pub direction: RampDirection,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub table: FeatureTable,
    pub annotations: Vec<RampAnnotation>,
}

/// Speed offset contributed by one event at step `t`.
fn event_offset(e: &RampEventSpec, t: usize) -> f64 {
    let dur = e.duration as f64;
    let full = e.magnitude * e.direction.sign();
    if t <= e.start {
        return 0.0;
    }
    let rise_end = e.start + e.duration;
    if t <= rise_end {
        return full * (t - e.start) as f64 / dur;
    }
    match e.hold {
        None => full,
        Some(hold) => {
            let fall_start = rise_end + hold;
            if t <= fall_start {
                full
            } else if t <= fall_start + e.duration {
                full * (1.0 - (t - fall_start) as f64 / dur)
            } else {
                0.0
            }
        }
    }
}

pub fn synth_scenario(config: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    config.validate()?;
    generate(config, &config.events, config.length, seed)
}

/// Companion history of `config.history_length` steps holding one analogue of
/// every configured event, spread evenly, with independent noise.
pub fn synth_history(config: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    config.validate()?;
    let length = config
        .history_length
        .ok_or_else(|| Error::InvalidConfig("history_length is not set".into()))?;
    let n = config.events.len().max(1);
    let events: Vec<RampEventSpec> = config
        .events
        .iter()
        .enumerate()
        .map(|(i, e)| RampEventSpec {
            start: (2 * i + 1) * length / (2 * n),
            ..e.clone()
        })
        .filter(|e| e.start + e.duration < length)
        .collect();
    generate(config, &events, length, seed ^ HISTORY_SEED_SALT)
}

fn generate(
    config: &ScenarioConfig,
    events: &[RampEventSpec],
    length: usize,
    seed: u64,
) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = move || -> f64 { StandardNormal.sample(&mut rng) };

    let curve = config.curve();
    let day_steps = (86_400 / config.step_s).max(1) as f64;

    let mut base = config.base_mean;
    let mut speed = Vec::with_capacity(length);
    let mut nwp_speed = Vec::with_capacity(length);
    let mut nwp_temp = Vec::with_capacity(length);
    for t in 0..length {
        let offset: f64 = events.iter().map(|e| event_offset(e, t)).sum();
        let v = (base + offset + config.measurement_sigma * gauss()).max(0.0);
        speed.push(v);
        nwp_speed.push((0.965 * v + config.nwp_sigma * gauss()).max(0.0));
        let phase = 2.0 * std::f64::consts::PI * t as f64 / day_steps;
        nwp_temp.push(12.0 + 4.0 * phase.sin() + 0.15 * (v - config.base_mean) + 0.5 * gauss());
        base += config.reversion * (config.base_mean - base) + config.noise_sigma * gauss();
    }
    let power: Vec<f64> = speed.iter().map(|&v| power_curve(v, &curve)).collect();

    let col = |values: Vec<f64>, kind, name: &str| {
        WindSeries::new(values, config.start_time, config.step_s, kind, name)
    };
    let table = FeatureTable::new(vec![
        col(speed, SeriesKind::Speed, WIND_SPEED)?,
        col(power, SeriesKind::Power, POWER)?,
        col(nwp_speed, SeriesKind::NwpFeature, NWP_SPEED)?,
        col(nwp_temp, SeriesKind::NwpFeature, NWP_TEMPERATURE)?,
    ])?
    .with_target(POWER)?;

    let step = chrono::Duration::seconds(config.step_s);
    let at = |i: usize| config.start_time + step * i as i32;
    let mut annotations: Vec<RampAnnotation> = Vec::new();
    for e in events {
        let mut push = |start: usize, direction| {
            if start >= length {
                return;
            }
            let end = (start + e.duration).min(length - 1);
            annotations.push(RampAnnotation {
                start,
                end,
                start_time: at(start),
                end_time: at(end),
                direction,
                magnitude: e.magnitude,
            });
        };
        push(e.start, e.direction);
        if let Some(hold) = e.hold {
            let back = match e.direction {
                RampDirection::Up => RampDirection::Down,
                RampDirection::Down => RampDirection::Up,
            };
            push(e.start + e.duration + hold, back);
        }
    }
    annotations.sort_by_key(|a| a.start);

    Ok(Scenario { table, annotations })
}
