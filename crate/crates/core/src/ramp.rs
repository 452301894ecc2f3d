//! Between-extrema segmentation, ramp factor and ramp-event labelling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poles::ExtremaSet;
use crate::series::WindSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
    Flat,
}

impl Direction {
    pub fn of(delta_w: f64) -> Self {
        if delta_w > 0.0 {
            Direction::Up
        } else if delta_w < 0.0 {
            Direction::Down
        } else {
            Direction::Flat
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Direction::Up => 1.0,
            Direction::Down => -1.0,
            Direction::Flat => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Flat => "flat",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampSegment {
    /// Inclusive bounds; consecutive segments share an endpoint.
    pub start_idx: usize,
    pub end_idx: usize,
    pub values: Vec<f64>,
    /// `w_end − w_start`.
    pub delta_w: f64,
    /// Point count × step, in seconds.
    pub period_c: f64,
    pub rho: f64,
    pub direction: Direction,
}

impl RampSegment {
    /// Segment over `values[start..=end]`, scored with per-step derivatives.
    pub fn new(values: &[f64], start_idx: usize, end_idx: usize, step_s: i64) -> Result<Self> {
        if end_idx <= start_idx || end_idx >= values.len() {
            return Err(Error::InvalidParameter(format!(
                "segment bounds [{start_idx}, {end_idx}] on {} points",
                values.len()
            )));
        }
        let slice = values[start_idx..=end_idx].to_vec();
        let delta_w = slice[slice.len() - 1] - slice[0];
        let rho = ramp_factor(&slice, 1.0)?;
        Ok(Self {
            start_idx,
            end_idx,
            period_c: slice.len() as f64 * step_s as f64,
            values: slice,
            delta_w,
            rho,
            direction: Direction::of(delta_w),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        (self.start_idx..=self.end_idx).contains(&index)
    }
}

/// Segment boundaries: 0, every extremum index, and the last index.
pub fn boundaries(len: usize, extrema: &ExtremaSet) -> Vec<usize> {
    let mut b = vec![0];
    for i in extrema.indices() {
        if i > *b.last().unwrap() && i < len - 1 {
            b.push(i);
        }
    }
    b.push(len - 1);
    b
}

/// Cut `series` at the extrema; the runs before the first and after the last
/// extremum are segments too.
pub fn segment_by_extrema(series: &WindSeries, extrema: &ExtremaSet) -> Result<Vec<RampSegment>> {
    if series.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            found: series.len(),
        });
    }
    if extrema.points.iter().any(|p| p.index >= series.len()) {
        return Err(Error::InvalidParameter("extremum index beyond series".into()));
    }
    segment_at(series, &boundaries(series.len(), extrema))
}

/// Segments between consecutive boundary indices, e.g. to carry a speed
/// segmentation over to the power series on the same clock.
pub fn segment_at(series: &WindSeries, bounds: &[usize]) -> Result<Vec<RampSegment>> {
    bounds
        .windows(2)
        .map(|w| RampSegment::new(series.values(), w[0], w[1], series.step_s()))
        .collect()
}

/// Endpoint change exceeds `p_val`.
pub fn ramp_def1(p_start: f64, p_end: f64, p_val: f64) -> bool {
    (p_end - p_start).abs() > p_val
}

/// Range of the window exceeds `p_val`.
pub fn ramp_def2(window: &[f64], p_val: f64) -> bool {
    if window.is_empty() {
        return false;
    }
    let (lo, hi) = crate::series::min_max(window);
    hi - lo > p_val
}

/// `ρ = (ΔW / c) × Σ_a dw/dt` with `c` the point count and forward differences,
/// the last difference counted twice so there are `c` summands.
pub fn ramp_factor(values: &[f64], dt: f64) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            found: values.len(),
        });
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let c = values.len();
    let diffs: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]) / dt).collect();
    let sum = diffs.iter().sum::<f64>() + diffs[diffs.len() - 1];
    let delta_w = values[c - 1] - values[0];
    Ok(delta_w / c as f64 * sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Definition {
    Def1,
    Def2,
    Rf,
}

impl Definition {
    pub fn as_str(self) -> &'static str {
        match self {
            Definition::Def1 => "def1",
            Definition::Def2 => "def2",
            Definition::Rf => "rf",
        }
    }
}

impl std::str::FromStr for Definition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "def1" => Ok(Definition::Def1),
            "def2" => Ok(Definition::Def2),
            "rf" => Ok(Definition::Rf),
            _ => Err(Error::InvalidParameter(format!("unknown ramp definition `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampThresholds {
    /// Change threshold for the two power definitions, in the segment's units.
    pub p_val: f64,
    /// |ρ| threshold for the ramp-factor definition.
    pub rho: f64,
}

impl RampThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_val > 0.0) || !(self.rho > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ramp thresholds must be positive, got p_val={} rho={}",
                self.p_val, self.rho
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampEvent {
    pub segment: usize,
    pub start_idx: usize,
    pub end_idx: usize,
    pub definition: Definition,
    pub threshold_used: f64,
    pub fired: bool,
    pub rho: f64,
    pub direction: Direction,
}

pub fn fires(segment: &RampSegment, definition: Definition, thresholds: &RampThresholds) -> bool {
    match definition {
        Definition::Def1 => ramp_def1(segment.values[0], segment.values[segment.len() - 1], thresholds.p_val),
        Definition::Def2 => ramp_def2(&segment.values, thresholds.p_val),
        Definition::Rf => segment.rho.abs() > thresholds.rho,
    }
}

/// One event per segment under `definition`.
pub fn label_ramps(
    segments: &[RampSegment],
    thresholds: &RampThresholds,
    definition: Definition,
) -> Result<Vec<RampEvent>> {
    thresholds.validate()?;
    let threshold_used = match definition {
        Definition::Rf => thresholds.rho,
        _ => thresholds.p_val,
    };
    Ok(segments
        .iter()
        .enumerate()
        .map(|(i, s)| RampEvent {
            segment: i,
            start_idx: s.start_idx,
            end_idx: s.end_idx,
            definition,
            threshold_used,
            fired: fires(s, definition, thresholds),
            rho: s.rho,
            direction: s.direction,
        })
        .collect())
}

/// Linear-interpolated quantile of an unsorted sample, `q` in `[0, 1]`.
pub fn quantile(sample: &[f64], q: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::Empty);
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(s[lo] + (s[hi] - s[lo]) * (pos - lo as f64))
}

/// 90th percentile of |ρ|; callers pass the training-window segments.
pub fn default_rho_threshold(segments: &[RampSegment]) -> Result<f64> {
    let abs: Vec<f64> = segments.iter().map(|s| s.rho.abs()).collect();
    quantile(&abs, 0.9)
}
