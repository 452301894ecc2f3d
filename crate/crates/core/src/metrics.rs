//! Grid-code forecast metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::pearson;

/// `1 − |error| / capacity` must reach this for a point to qualify.
pub const QUALIFIED_SCORE: f64 = 0.75;

/// AC denominator floor as a fraction of capacity.
pub const AC_EPSILON_FRACTION: f64 = 0.01;

fn paired(pred: &[f64], meas: &[f64]) -> Result<()> {
    if pred.len() != meas.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: meas.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty);
    }
    Ok(())
}

fn positive(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidParameter(format!("{name} must be positive, got {x}")));
    }
    Ok(())
}

pub fn rmse(pred: &[f64], meas: &[f64]) -> Result<f64> {
    paired(pred, meas)?;
    let ss: f64 = pred.iter().zip(meas).map(|(p, m)| (m - p) * (m - p)).sum();
    Ok((ss / pred.len() as f64).sqrt())
}

pub fn mae(pred: &[f64], meas: &[f64]) -> Result<f64> {
    paired(pred, meas)?;
    Ok(pred.iter().zip(meas).map(|(p, m)| (m - p).abs()).sum::<f64>() / pred.len() as f64)
}

/// `(1 − sqrt(mean(((meas − pred) / max(|pred|, ε))²))) × 100`; negative for
/// forecasts worse than 100% relative error.
pub fn accuracy_ac(pred: &[f64], meas: &[f64], epsilon: f64) -> Result<f64> {
    paired(pred, meas)?;
    positive("epsilon", epsilon)?;
    let ms: f64 = pred
        .iter()
        .zip(meas)
        .map(|(p, m)| {
            let r = (m - p) / p.abs().max(epsilon);
            r * r
        })
        .sum::<f64>()
        / pred.len() as f64;
    Ok((1.0 - ms.sqrt()) * 100.0)
}

fn qualifies(p: f64, m: f64, capacity: f64) -> bool {
    1.0 - (m - p).abs() / capacity >= QUALIFIED_SCORE
}

pub fn qualification_flags(pred: &[f64], meas: &[f64], capacity: f64) -> Result<Vec<bool>> {
    paired(pred, meas)?;
    positive("capacity", capacity)?;
    Ok(pred.iter().zip(meas).map(|(&p, &m)| qualifies(p, m, capacity)).collect())
}

/// Flags against a per-point on-line capacity.
pub fn qualification_flags_with(pred: &[f64], meas: &[f64], capacity: &[f64]) -> Result<Vec<bool>> {
    paired(pred, meas)?;
    paired(pred, capacity)?;
    capacity.iter().try_for_each(|&c| positive("capacity", c))?;
    Ok(pred
        .iter()
        .zip(meas)
        .zip(capacity)
        .map(|((&p, &m), &c)| qualifies(p, m, c))
        .collect())
}

/// Percentage of qualified points.
pub fn pr_power(flags: &[bool]) -> Result<f64> {
    if flags.is_empty() {
        return Err(Error::Empty);
    }
    Ok(flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64 * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extras {
    /// Pearson correlation, 0 when either side is constant.
    pub cc: f64,
    /// RMSE as a percentage of capacity.
    pub r_rmse: f64,
    /// MAE as a percentage of capacity.
    pub r_mae: f64,
}

pub fn extras(pred: &[f64], meas: &[f64], capacity: f64) -> Result<Extras> {
    positive("capacity", capacity)?;
    Ok(Extras {
        cc: pearson(pred, meas),
        r_rmse: rmse(pred, meas)? / capacity * 100.0,
        r_mae: mae(pred, meas)? / capacity * 100.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmse: f64,
    pub mae: f64,
    pub ac: f64,
    pub pr_power: f64,
    pub qualified_flags: Vec<bool>,
    pub n: usize,
    pub capacity: f64,
    pub extras: Extras,
}

impl EvalReport {
    /// Fixed-order `name value` lines.
    pub fn table(&self) -> String {
        let rows = [
            ("n", self.n as f64),
            ("capacity_mw", self.capacity),
            ("rmse_mw", self.rmse),
            ("mae_mw", self.mae),
            ("ac_pct", self.ac),
            ("pr_power_pct", self.pr_power),
            ("cc", self.extras.cc),
            ("r_rmse_pct", self.extras.r_rmse),
            ("r_mae_pct", self.extras.r_mae),
        ];
        rows.iter().map(|(k, v)| format!("{k:<14}{v:>12.4}\n")).collect()
    }
}

/// All metrics at constant capacity, AC guarded at 1% of capacity.
pub fn evaluate(pred: &[f64], meas: &[f64], capacity: f64) -> Result<EvalReport> {
    let flags = qualification_flags(pred, meas, capacity)?;
    Ok(EvalReport {
        rmse: rmse(pred, meas)?,
        mae: mae(pred, meas)?,
        ac: accuracy_ac(pred, meas, AC_EPSILON_FRACTION * capacity)?,
        pr_power: pr_power(&flags)?,
        n: pred.len(),
        capacity,
        extras: extras(pred, meas, capacity)?,
        qualified_flags: flags,
    })
}
