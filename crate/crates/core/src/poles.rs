//! Pole adaptive selection and pole-rate screening of decomposed modes.
//!
//! A pole is an interior local extremum. Close neighbouring poles (pseudo-poles)
//! are thinned with a window proportional to the value range; each mode's
//! surviving pole count relative to the full reconstruction decides whether the
//! mode is kept.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{min_max, WindSeries};
use crate::vmd::{reconstruct, vmd_decompose, ModeSet, VmdParams};

/// Ranges below this fraction of the series magnitude are round-off, not signal.
const FLAT_RELATIVE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub index: usize,
    pub value: f64,
    pub kind: ExtremumKind,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExtremaSet {
    pub points: Vec<Extremum>,
    pub source_len: usize,
}

impl ExtremaSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.index).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionParams {
    /// Adaptive window coefficient, `0 < ell < 1`.
    pub ell: f64,
    /// Pole-rate threshold.
    pub tau_rate: f64,
}

impl Default for SelectionParams {
    fn default() -> Self {
        Self {
            ell: 0.05,
            tau_rate: 1.0,
        }
    }
}

impl SelectionParams {
    pub fn new(ell: f64, tau_rate: f64) -> Result<Self> {
        let p = Self { ell, tau_rate };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ell > 0.0 && self.ell < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "ell must lie in (0, 1), got {}",
                self.ell
            )));
        }
        if !(self.tau_rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tau_rate must be positive, got {}",
                self.tau_rate
            )));
        }
        Ok(())
    }
}

/// All strict interior extrema. A plateau bounded by lower (higher) neighbours
/// yields one maximum (minimum) at its midpoint.
pub fn find_extrema(values: &[f64]) -> Result<ExtremaSet> {
    let n = values.len();
    if n < 3 {
        return Err(Error::TooShort { needed: 3, found: n });
    }
    let mut points = Vec::new();
    let mut i = 1;
    while i < n - 1 {
        // extend over a run of equal values
        let mut j = i;
        while j + 1 < n && values[j + 1] == values[i] {
            j += 1;
        }
        if j == n - 1 {
            break;
        }
        let (left, here, right) = (values[i - 1], values[i], values[j + 1]);
        let kind = if here > left && here > right {
            Some(ExtremumKind::Max)
        } else if here < left && here < right {
            Some(ExtremumKind::Min)
        } else {
            None
        };
        if let Some(kind) = kind {
            points.push(Extremum {
                index: (i + j) / 2,
                value: here,
                kind,
            });
        }
        i = j + 1;
    }
    Ok(ExtremaSet {
        points,
        source_len: n,
    })
}

/// `ell × |max − min|` over the series.
pub fn dynamic_window(values: &[f64], ell: f64) -> f64 {
    let (lo, hi) = min_max(values);
    if values.is_empty() {
        return 0.0;
    }
    ell * (hi - lo).abs()
}

/// Greedy left-to-right thinning: keep the first pole, then keep a pole only
/// when its value differs from the last kept one by more than `width`.
pub fn select_poles(extrema: &ExtremaSet, width: f64) -> ExtremaSet {
    let mut kept: Vec<Extremum> = Vec::with_capacity(extrema.len());
    for p in &extrema.points {
        match kept.last() {
            Some(last) if (p.value - last.value).abs() <= width => {}
            _ => kept.push(*p),
        }
    }
    ExtremaSet {
        points: kept,
        source_len: extrema.source_len,
    }
}

pub fn pole_rate(selected_count: usize, n_original: usize) -> Result<f64> {
    if n_original == 0 {
        return Err(Error::ZeroBaseline);
    }
    Ok(selected_count as f64 / n_original as f64)
}

fn is_numerically_flat(values: &[f64]) -> bool {
    let (lo, hi) = min_max(values);
    let scale = lo.abs().max(hi.abs()).max(1.0);
    hi - lo <= FLAT_RELATIVE * scale
}

/// Poles surviving adaptive selection with coefficient `ell`.
pub fn selected_poles(values: &[f64], ell: f64) -> Result<ExtremaSet> {
    if values.len() < 3 || is_numerically_flat(values) {
        return Ok(ExtremaSet {
            points: Vec::new(),
            source_len: values.len(),
        });
    }
    let all = find_extrema(values)?;
    Ok(select_poles(&all, dynamic_window(values, ell)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Screening {
    /// Zero-based mode indices with rate ≤ τ.
    pub kept: Vec<usize>,
    pub rates: Vec<f64>,
    pub counts: Vec<usize>,
    pub n_original: usize,
    #[serde(skip)]
    pub recon: Option<WindSeries>,
}

/// Rates and kept set from per-mode selected-pole counts.
///
/// With a zero baseline, modes without poles get rate 0 and the rest +∞.
pub fn screen_counts(counts: &[usize], n_original: usize, tau_rate: f64) -> Result<(Vec<usize>, Vec<f64>)> {
    let rates: Vec<f64> = counts
        .iter()
        .map(|&c| match pole_rate(c, n_original) {
            Ok(r) => r,
            Err(_) if c == 0 => 0.0,
            Err(_) => f64::INFINITY,
        })
        .collect();
    let kept: Vec<usize> = rates
        .iter()
        .enumerate()
        .filter(|(_, &r)| r <= tau_rate)
        .map(|(i, _)| i)
        .collect();
    if kept.is_empty() {
        return Err(Error::AllModesRejected { rates });
    }
    Ok((kept, rates))
}

pub fn screen_modes(modes: &ModeSet, params: &SelectionParams) -> Result<Screening> {
    params.validate()?;
    let all: Vec<usize> = (0..modes.k()).collect();
    let full = reconstruct(modes, &all)?;
    let n_original = selected_poles(full.values(), params.ell)?.len();
    let counts = modes
        .modes
        .par_iter()
        .map(|m| selected_poles(m, params.ell).map(|s| s.len()))
        .collect::<Result<Vec<_>>>()?;
    let (kept, rates) = screen_counts(&counts, n_original, params.tau_rate)?;
    let recon = reconstruct(modes, &kept)?;
    Ok(Screening {
        kept,
        rates,
        counts,
        n_original,
        recon: Some(recon),
    })
}

#[derive(Debug, Clone)]
pub struct VmdIcOutput {
    pub modes: ModeSet,
    pub screening: Screening,
    /// Sum of the kept modes.
    pub recon: WindSeries,
    /// Every interior extremum of `recon`.
    pub all_extrema: ExtremaSet,
    /// Selected poles of `recon`: the segmentation skeleton.
    pub extrema: ExtremaSet,
    pub width: f64,
}

/// Decompose, screen modes by pole rate, reconstruct, and select the poles of
/// the reconstruction.
pub fn vmd_ic(
    series: &WindSeries,
    vmd: &VmdParams,
    selection: &SelectionParams,
) -> Result<VmdIcOutput> {
    selection.validate()?;
    let modes = vmd_decompose(series, vmd)?;
    let mut screening = screen_modes(&modes, selection)?;
    let recon = screening
        .recon
        .take()
        .expect("screen_modes always reconstructs")
        .relabel(series.label());
    let (all_extrema, extrema, width) = if is_numerically_flat(recon.values()) {
        (ExtremaSet::default(), ExtremaSet::default(), 0.0)
    } else {
        let all = find_extrema(recon.values())?;
        let width = dynamic_window(recon.values(), selection.ell);
        let sel = select_poles(&all, width);
        (all, sel, width)
    };
    Ok(VmdIcOutput {
        modes,
        screening,
        recon,
        all_extrema,
        extrema,
        width,
    })
}
