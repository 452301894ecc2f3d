//! Uniformly sampled series, aligned feature tables and the turbine power curve.

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default sampling interval, 15 minutes.
pub const DEFAULT_STEP_S: i64 = 900;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesKind {
    /// Wind speed in m/s.
    Speed,
    /// Active power in MW.
    Power,
    /// Numerical weather prediction covariate.
    NwpFeature,
    /// Signed quantity derived from another series (modes, reconstructions, rescaled values).
    Derived,
}

impl SeriesKind {
    fn non_negative(self) -> bool {
        matches!(self, SeriesKind::Speed | SeriesKind::Power)
    }
}

/// A uniformly sampled scalar series.
///
/// Values are finite and non-empty; speed and power series are non-negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindSeries {
    values: Vec<f64>,
    start_time: DateTime<Utc>,
    step_s: i64,
    kind: SeriesKind,
    label: String,
}

impl WindSeries {
    pub fn new(
        values: Vec<f64>,
        start_time: DateTime<Utc>,
        step_s: i64,
        kind: SeriesKind,
        label: impl Into<String>,
    ) -> Result<Self> {
        let label = label.into();
        if values.is_empty() {
            return Err(Error::InvalidSeries(format!("`{label}` is empty")));
        }
        if step_s <= 0 {
            return Err(Error::InvalidSeries(format!(
                "`{label}` has non-positive step {step_s}"
            )));
        }
        if let Some(row) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { row, column: label });
        }
        if kind.non_negative() {
            if let Some(row) = values.iter().position(|&v| v < 0.0) {
                return Err(Error::InvalidSeries(format!(
                    "`{label}` has negative value {} at row {row}",
                    values[row]
                )));
            }
        }
        Ok(Self {
            values,
            start_time,
            step_s,
            kind,
            label,
        })
    }

    /// Series starting at the Unix epoch with the default 15-minute step.
    pub fn from_values(values: Vec<f64>, kind: SeriesKind) -> Result<Self> {
        Self::new(values, DateTime::UNIX_EPOCH, DEFAULT_STEP_S, kind, "series")
    }

    /// Same clock and label, new values and kind.
    pub fn with_values(&self, values: Vec<f64>, kind: SeriesKind) -> Result<Self> {
        Self::new(values, self.start_time, self.step_s, kind, self.label.clone())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn start_time(&self) -> DateTime<Utc> {
        self.start_time
    }

    pub fn step_s(&self) -> i64 {
        self.step_s
    }

    /// Step length in hours.
    pub fn step_hours(&self) -> f64 {
        self.step_s as f64 / 3600.0
    }

    pub fn kind(&self) -> SeriesKind {
        self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn relabel(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn time_at(&self, index: usize) -> DateTime<Utc> {
        self.start_time + Duration::seconds(self.step_s * index as i64)
    }

    /// Index of `time` on this series' clock, if it falls exactly on a sample.
    pub fn index_of(&self, time: DateTime<Utc>) -> Option<usize> {
        let offset = (time - self.start_time).num_seconds();
        if offset < 0 || offset % self.step_s != 0 {
            return None;
        }
        let idx = (offset / self.step_s) as usize;
        (idx < self.len()).then_some(idx)
    }

    pub fn same_clock(&self, other: &WindSeries) -> bool {
        self.start_time == other.start_time && self.step_s == other.step_s
    }

    pub fn min_max(&self) -> (f64, f64) {
        min_max(&self.values)
    }
}

/// Named columns sharing one clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    columns: Vec<WindSeries>,
    target: Option<String>,
}

impl FeatureTable {
    pub fn new(columns: Vec<WindSeries>) -> Result<Self> {
        let mut table = Self {
            columns: Vec::with_capacity(columns.len()),
            target: None,
        };
        for c in columns {
            table.push(c)?;
        }
        Ok(table)
    }

    pub fn push(&mut self, column: WindSeries) -> Result<()> {
        if let Some(first) = self.columns.first() {
            if first.len() != column.len() || !first.same_clock(&column) {
                return Err(Error::AlignmentError(format!(
                    "column `{}` is not aligned with `{}`",
                    column.label(),
                    first.label()
                )));
            }
        }
        if self.column(column.label()).is_some() {
            return Err(Error::InvalidSeries(format!(
                "duplicate column `{}`",
                column.label()
            )));
        }
        self.columns.push(column);
        Ok(())
    }

    pub fn with_target(mut self, name: &str) -> Result<Self> {
        if self.column(name).is_none() {
            return Err(Error::MissingColumn(name.to_string()));
        }
        self.target = Some(name.to_string());
        Ok(self)
    }

    pub fn target(&self) -> Option<&str> {
        self.target.as_deref()
    }

    pub fn columns(&self) -> &[WindSeries] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&WindSeries> {
        self.columns.iter().find(|c| c.label() == name)
    }

    pub fn require(&self, name: &str) -> Result<&WindSeries> {
        self.column(name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.label())
    }

    /// Number of rows (0 for a table without columns).
    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, |c| c.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn start_time(&self) -> Option<DateTime<Utc>> {
        self.columns.first().map(|c| c.start_time())
    }

    pub fn step_s(&self) -> Option<i64> {
        self.columns.first().map(|c| c.step_s())
    }

    pub fn time_at(&self, index: usize) -> Option<DateTime<Utc>> {
        self.columns.first().map(|c| c.time_at(index))
    }
}

/// Turbine operating envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerCurveSpec {
    pub cut_in: f64,
    pub rated_speed: f64,
    pub cut_out: f64,
    pub rated_power: f64,
}

impl PowerCurveSpec {
    pub fn new(cut_in: f64, rated_speed: f64, cut_out: f64, rated_power: f64) -> Result<Self> {
        let ok = cut_in > 0.0 && cut_in < rated_speed && rated_speed < cut_out && rated_power > 0.0;
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "power curve requires 0 < cut_in < rated_speed < cut_out and rated_power > 0, \
                 got ({cut_in}, {rated_speed}, {cut_out}, {rated_power})"
            )));
        }
        Ok(Self {
            cut_in,
            rated_speed,
            cut_out,
            rated_power,
        })
    }
}

impl Default for PowerCurveSpec {
    /// 5 MW machine: cut-in 3.5 m/s, rated at 10.5 m/s, cut-out 25 m/s.
    fn default() -> Self {
        Self {
            cut_in: 3.5,
            rated_speed: 10.5,
            cut_out: 25.0,
            rated_power: 5.0,
        }
    }
}

/// Electrical output in MW for a hub-height wind speed, with a cubic ramp
/// between cut-in and rated speed.
pub fn power_curve(speed: f64, spec: &PowerCurveSpec) -> f64 {
    if speed < spec.cut_in || speed >= spec.cut_out {
        0.0
    } else if speed >= spec.rated_speed {
        spec.rated_power
    } else {
        let lo = spec.cut_in.powi(3);
        let hi = spec.rated_speed.powi(3);
        spec.rated_power * (speed.powi(3) - lo) / (hi - lo)
    }
}

/// Rescale a series into `[lo, hi]`. A flat series maps to `lo`.
///
/// The output keeps the input kind unless the bounds admit negative values,
/// in which case it becomes [`SeriesKind::Derived`].
pub fn min_max_normalize(series: &WindSeries, lo: f64, hi: f64) -> Result<WindSeries> {
    let kind = if lo < 0.0 || hi < 0.0 {
        SeriesKind::Derived
    } else {
        series.kind()
    };
    series.with_values(min_max_scale(series.values(), lo, hi), kind)
}

/// Slice form of [`min_max_normalize`].
pub fn min_max_scale(values: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let (min, max) = min_max(values);
    let span = max - min;
    if !(span > 0.0) {
        return vec![lo; values.len()];
    }
    values
        .iter()
        .map(|&x| (lo + (x - min) / span * (hi - lo)).clamp(lo.min(hi), lo.max(hi)))
        .collect()
}

pub(crate) fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Pearson correlation; zero when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n < 2 {
        return 0.0;
    }
    let (x, y) = (&x[..n], &y[..n]);
    let mx = mean(x);
    let my = mean(y);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}
