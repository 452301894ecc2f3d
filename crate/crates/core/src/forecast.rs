//! Feature assembly from matched periods, ramp factors, NWP columns and
//! lagged power, plus persistence and ridge baselines.

use std::io::Write;
use std::ops::Range;

use chrono::{DateTime, Utc};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::csv_io::{format_timestamp, NWP_PREFIX, POWER};
use crate::error::{Error, Result};
use crate::matching::MatchRecord;
use crate::metrics::{evaluate, EvalReport};
use crate::ramp::RampEvent;
use crate::series::{min_max, min_max_scale, pearson, FeatureTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRank {
    pub name: String,
    pub correlation: f64,
}

/// Pearson correlation of every non-target column with the target, highest
/// first. Constant columns score 0.
pub fn rank_nwp_features(table: &FeatureTable, target: &str) -> Result<Vec<FeatureRank>> {
    let y = table.require(target)?;
    if table.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            found: table.len(),
        });
    }
    let mut ranks: Vec<FeatureRank> = table
        .columns()
        .iter()
        .filter(|c| c.label() != target)
        .map(|c| FeatureRank {
            name: c.label().to_string(),
            correlation: pearson(c.values(), y.values()),
        })
        .collect();
    ranks.sort_by(|a, b| b.correlation.total_cmp(&a.correlation));
    Ok(ranks)
}

/// The first `k` NWP columns of a ranking.
pub fn top_nwp(ranks: &[FeatureRank], k: usize) -> Vec<String> {
    ranks
        .iter()
        .filter(|r| r.name.starts_with(NWP_PREFIX))
        .take(k)
        .map(|r| r.name.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Lag `l` is the power `l − 1` steps before the forecast origin.
    pub lags: Vec<usize>,
    pub horizon: usize,
    /// NWP columns, read at the prediction time.
    pub nwp: Vec<String>,
    /// Ω plus matched historical power and speed.
    pub match_features: bool,
    /// ρ and the fired flag.
    pub ramp_features: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            lags: vec![1, 2, 3],
            horizon: 4,
            nwp: Vec::new(),
            match_features: true,
            ramp_features: true,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        if self.lags.is_empty() || self.lags.contains(&0) {
            return Err(Error::InvalidParameter("lags must be non-empty and positive".into()));
        }
        Ok(())
    }
}

/// Historical series the match offsets point into.
#[derive(Debug, Clone, Copy)]
pub struct History<'a> {
    pub speed: &'a [f64],
    pub power: &'a [f64],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    /// Min-max normalised to [0, 1], one vector per feature.
    pub columns: Vec<Vec<f64>>,
    /// Raw (min, max) of each feature before normalisation.
    pub bounds: Vec<(f64, f64)>,
    /// Forecast origin `t` of each row, as a table index.
    pub origins: Vec<usize>,
    /// Prediction time `t + horizon`.
    pub times: Vec<DateTime<Utc>>,
    /// Raw power at the origin.
    pub persistence: Vec<f64>,
    /// Raw power at `t + horizon`.
    pub target: Vec<f64>,
    pub horizon: usize,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }

    fn design(&self, rows: Range<usize>) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), self.n_features(), |r, c| self.columns[c][rows.start + r])
    }
}

/// Which event covers each index: segments own `[start, end)`, the last one
/// also its end point.
fn segment_lookup(events: &[RampEvent], n: usize) -> Result<Vec<usize>> {
    let mut owner = vec![usize::MAX; n];
    for (k, e) in events.iter().enumerate() {
        if e.end_idx >= n || e.end_idx <= e.start_idx {
            return Err(Error::AlignmentError(format!(
                "ramp segment [{}, {}] does not fit a table of {n} rows",
                e.start_idx, e.end_idx
            )));
        }
        owner[e.start_idx..e.end_idx].iter_mut().for_each(|o| *o = k);
    }
    if let Some(last) = events.last() {
        owner[last.end_idx] = events.len() - 1;
    }
    if let Some(t) = owner.iter().position(|&o| o == usize::MAX) {
        return Err(Error::AlignmentError(format!("no ramp segment covers row {t}")));
    }
    Ok(owner)
}

/// Build the feature matrix. Row `t` predicts power at `t + horizon`; rows
/// without a full lag window or target are dropped.
pub fn assemble_features(
    matches: &[MatchRecord],
    ramps: &[RampEvent],
    table: &FeatureTable,
    history: Option<History<'_>>,
    config: &FeatureConfig,
) -> Result<FeatureMatrix> {
    config.validate()?;
    let power = table.require(POWER)?.values();
    let n = power.len();
    let max_lag = *config.lags.iter().max().unwrap();
    if n < max_lag + config.horizon {
        return Err(Error::TooShort {
            needed: max_lag + config.horizon,
            found: n,
        });
    }
    let nwp: Vec<&[f64]> = config
        .nwp
        .iter()
        .map(|c| table.require(c).map(|s| s.values()))
        .collect::<Result<_>>()?;

    let needs_segments = config.match_features || config.ramp_features;
    let owner = if needs_segments { segment_lookup(ramps, n)? } else { Vec::new() };
    let matched: Vec<&MatchRecord> = if config.match_features {
        if history.is_none() {
            return Err(Error::AlignmentError("match features need a historical series".into()));
        }
        ramps
            .iter()
            .map(|e| {
                matches
                    .iter()
                    .find(|m| m.seg_start == e.start_idx && m.seg_end == e.end_idx)
                    .ok_or_else(|| {
                        Error::AlignmentError(format!("no match for segment [{}, {}]", e.start_idx, e.end_idx))
                    })
            })
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    if let Some(h) = history {
        if h.speed.len() != h.power.len() || h.speed.is_empty() {
            return Err(Error::AlignmentError("historical speed and power differ in length".into()));
        }
    }

    let mut names: Vec<String> = config.lags.iter().map(|l| format!("power_lag{l}")).collect();
    names.extend(config.nwp.iter().cloned());
    if config.ramp_features {
        names.extend(["rho".to_string(), "ramp_fired".to_string()]);
    }
    if config.match_features {
        names.extend(["omega", "match_power", "match_speed"].map(String::from));
    }

    let rows: Vec<usize> = (max_lag - 1..n - config.horizon).collect();
    let mut raw: Vec<Vec<f64>> = vec![Vec::with_capacity(rows.len()); names.len()];
    for &t in &rows {
        let target_t = t + config.horizon;
        let mut f: Vec<f64> = config.lags.iter().map(|&l| power[t + 1 - l]).collect();
        f.extend(nwp.iter().map(|c| c[target_t]));
        if config.ramp_features {
            let e = &ramps[owner[t]];
            f.push(e.rho);
            f.push(if e.fired { 1.0 } else { 0.0 });
        }
        if config.match_features {
            let m = matched[owner[t]];
            let h = history.unwrap();
            let at = (m.hist_start + (t - m.seg_start) + config.horizon).min(h.power.len() - 1);
            f.extend([m.omega, h.power[at], h.speed[at]]);
        }
        for (col, v) in raw.iter_mut().zip(f) {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    row: t,
                    column: "feature".into(),
                });
            }
            col.push(v);
        }
    }

    let bounds: Vec<(f64, f64)> = raw.iter().map(|c| min_max(c)).collect();
    let columns: Vec<Vec<f64>> = raw.iter().map(|c| min_max_scale(c, 0.0, 1.0)).collect();
    Ok(FeatureMatrix {
        names,
        columns,
        bounds,
        times: rows
            .iter()
            .map(|&t| table.time_at(t + config.horizon).expect("non-empty table"))
            .collect(),
        persistence: rows.iter().map(|&t| power[t]).collect(),
        target: rows.iter().map(|&t| power[t + config.horizon]).collect(),
        origins: rows,
        horizon: config.horizon,
    })
}

pub trait Predictor {
    fn id(&self) -> String;
    fn fit(&mut self, matrix: &FeatureMatrix, rows: Range<usize>) -> Result<()>;
    fn predict(&self, matrix: &FeatureMatrix, rows: Range<usize>) -> Result<Vec<f64>>;
}

/// Power at the origin carried forward.
#[derive(Debug, Clone, Copy, Default)]
pub struct Persistence;

impl Predictor for Persistence {
    fn id(&self) -> String {
        "persistence".into()
    }

    fn fit(&mut self, _: &FeatureMatrix, _: Range<usize>) -> Result<()> {
        Ok(())
    }

    fn predict(&self, matrix: &FeatureMatrix, rows: Range<usize>) -> Result<Vec<f64>> {
        Ok(matrix.persistence[rows].to_vec())
    }
}

/// Closed-form ridge regression with an unpenalised intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct Ridge {
    pub lambda: f64,
    pub coefficients: Option<DVector<f64>>,
    pub intercept: f64,
}

impl Ridge {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("ridge lambda must be ≥ 0, got {lambda}")));
        }
        Ok(Self {
            lambda,
            coefficients: None,
            intercept: 0.0,
        })
    }
}

impl Predictor for Ridge {
    fn id(&self) -> String {
        format!("ridge(lambda={})", self.lambda)
    }

    fn fit(&mut self, matrix: &FeatureMatrix, rows: Range<usize>) -> Result<()> {
        let p = matrix.n_features();
        if rows.len() < p.max(1) {
            return Err(Error::InsufficientRows {
                rows: rows.len(),
                features: p,
            });
        }
        let x = matrix.design(rows.clone());
        let y = DVector::from_column_slice(&matrix.target[rows]);
        let x_mean = x.row_mean();
        let y_mean = y.mean();
        let mut xc = x;
        for mut r in xc.row_iter_mut() {
            r -= &x_mean;
        }
        let yc = y.add_scalar(-y_mean);

        let beta = if self.lambda == 0.0 {
            let svd = xc.clone().svd(true, true);
            let s_max = svd.singular_values.max();
            let tol = s_max * xc.nrows().max(p) as f64 * f64::EPSILON;
            if s_max == 0.0 || svd.singular_values.iter().any(|&s| s <= tol) {
                return Err(Error::SingularSystem);
            }
            svd.solve(&yc, tol).map_err(|_| Error::SingularSystem)?
        } else {
            let gram = xc.tr_mul(&xc) + DMatrix::identity(p, p) * self.lambda;
            let chol = gram.cholesky().ok_or(Error::SingularSystem)?;
            chol.solve(&xc.tr_mul(&yc))
        };
        self.intercept = y_mean - (x_mean * &beta)[0];
        self.coefficients = Some(beta);
        Ok(())
    }

    fn predict(&self, matrix: &FeatureMatrix, rows: Range<usize>) -> Result<Vec<f64>> {
        let beta = self
            .coefficients
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("ridge model is not fitted".into()))?;
        let x = matrix.design(rows);
        Ok((x * beta).iter().map(|v| v + self.intercept).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    pub model_id: String,
    pub horizon: usize,
    pub capacity: f64,
    pub times: Vec<DateTime<Utc>>,
    pub predictions: Vec<f64>,
    pub actuals: Vec<f64>,
    pub metrics: EvalReport,
}

impl ForecastReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["timestamp", "actual", "predicted"])?;
        for ((t, a), p) in self.times.iter().zip(&self.actuals).zip(&self.predictions) {
            w.write_record([format_timestamp(*t), a.to_string(), p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// First index of the test rows: `⌊n · split⌋`, leaving both sides non-empty.
pub fn split_point(n_rows: usize, split: f64) -> Result<usize> {
    if !(split > 0.0 && split < 1.0) {
        return Err(Error::InvalidParameter(format!("split must lie in (0, 1), got {split}")));
    }
    let k = (n_rows as f64 * split).floor() as usize;
    if k == 0 || k >= n_rows {
        return Err(Error::InsufficientRows {
            rows: n_rows,
            features: 0,
        });
    }
    Ok(k)
}

fn report(
    model_id: String,
    matrix: &FeatureMatrix,
    rows: Range<usize>,
    raw: Vec<f64>,
    capacity: f64,
) -> Result<ForecastReport> {
    let predictions: Vec<f64> = raw.into_iter().map(|v| v.clamp(0.0, capacity)).collect();
    let actuals = matrix.target[rows.clone()].to_vec();
    Ok(ForecastReport {
        metrics: evaluate(&predictions, &actuals, capacity)?,
        model_id,
        horizon: matrix.horizon,
        capacity,
        times: matrix.times[rows].to_vec(),
        predictions,
        actuals,
    })
}

/// Fit on the chronologically first `split` fraction, predict the rest.
pub fn fit_predict(
    model: &mut dyn Predictor,
    matrix: &FeatureMatrix,
    split: f64,
    capacity: f64,
) -> Result<ForecastReport> {
    let k = split_point(matrix.n_rows(), split)?;
    model.fit(matrix, 0..k)?;
    let rows = k..matrix.n_rows();
    let raw = model.predict(matrix, rows.clone())?;
    report(model.id(), matrix, rows, raw, capacity)
}

/// Persistence over every row.
pub fn predict_persistence(matrix: &FeatureMatrix, capacity: f64) -> Result<ForecastReport> {
    let rows = 0..matrix.n_rows();
    report(Persistence.id(), matrix, rows.clone(), Persistence.predict(matrix, rows)?, capacity)
}

pub fn fit_predict_linear(
    matrix: &FeatureMatrix,
    ridge_lambda: f64,
    split: f64,
    capacity: f64,
) -> Result<ForecastReport> {
    fit_predict(&mut Ridge::new(ridge_lambda)?, matrix, split, capacity)
}

/// Mean squared error.
pub fn mse_objective(pred: &[f64], actual: &[f64]) -> Result<f64> {
    if pred.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: actual.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty);
    }
    Ok(pred.iter().zip(actual).map(|(p, a)| (a - p) * (a - p)).sum::<f64>() / pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::rmse;
    use crate::ramp::{Definition, Direction};
    use crate::series::{SeriesKind, WindSeries};

    fn col(name: &str, v: Vec<f64>, kind: SeriesKind) -> WindSeries {
        WindSeries::from_values(v, kind).unwrap().relabel(name)
    }

    fn power_table(p: Vec<f64>) -> FeatureTable {
        FeatureTable::new(vec![col(POWER, p, SeriesKind::Power)]).unwrap()
    }

    fn event(k: usize, start: usize, end: usize, fired: bool) -> RampEvent {
        RampEvent {
            segment: k,
            start_idx: start,
            end_idx: end,
            definition: Definition::Rf,
            threshold_used: 1.0,
            fired,
            rho: k as f64,
            direction: Direction::Up,
        }
    }

    fn plain(horizon: usize, lags: Vec<usize>) -> FeatureConfig {
        FeatureConfig {
            lags,
            horizon,
            nwp: Vec::new(),
            match_features: false,
            ramp_features: false,
        }
    }

    #[test]
    fn ranking_examples() {
        let y: Vec<f64> = vec![1.0, 3.0, 2.0, 5.0, 4.0];
        let t = FeatureTable::new(vec![
            col(POWER, y.clone(), SeriesKind::Power),
            col("nwp_flat", vec![2.0; 5], SeriesKind::NwpFeature),
            col("neg", y.iter().map(|v| -v).collect(), SeriesKind::Derived),
            col("nwp_same", y.clone(), SeriesKind::NwpFeature),
        ])
        .unwrap();
        let r = rank_nwp_features(&t, POWER).unwrap();
        let names: Vec<&str> = r.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, vec!["nwp_same", "nwp_flat", "neg"]);
        assert!((r[0].correlation - 1.0).abs() < 1e-12);
        assert_eq!(r[1].correlation, 0.0);
        assert!((r[2].correlation + 1.0).abs() < 1e-12);
        assert_eq!(top_nwp(&r, 1), vec!["nwp_same"]);
        assert!(rank_nwp_features(&t, "missing").is_err());
    }

    #[test]
    fn horizon_one_targets_next_step() {
        let p: Vec<f64> = (0..10).map(|i| i as f64 * 0.5).collect();
        let m = assemble_features(&[], &[], &power_table(p.clone()), None, &plain(1, vec![1])).unwrap();
        assert_eq!(m.n_rows(), 9);
        for (i, &t) in m.origins.iter().enumerate() {
            assert_eq!(m.target[i], p[t + 1]);
            assert_eq!(m.persistence[i], p[t]);
        }
    }

    #[test]
    fn warm_up_rows_dropped() {
        let p: Vec<f64> = (0..12).map(f64::from).collect();
        let m = assemble_features(&[], &[], &power_table(p), None, &plain(2, vec![1, 4])).unwrap();
        assert_eq!(m.origins.first(), Some(&3));
        assert_eq!(m.origins.last(), Some(&9));
        assert_eq!(m.bounds[1], (0.0, 6.0));
        assert!(m.columns.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn ramp_flag_follows_enclosing_segment() {
        let p: Vec<f64> = (0..10).map(|i| (i as f64).sin().abs()).collect();
        let ev = vec![event(0, 0, 4, false), event(1, 4, 9, true)];
        let cfg = FeatureConfig {
            ramp_features: true,
            ..plain(1, vec![1])
        };
        let m = assemble_features(&[], &ev, &power_table(p), None, &cfg).unwrap();
        let flag = m.column("ramp_fired").unwrap();
        for (i, &t) in m.origins.iter().enumerate() {
            assert_eq!(flag[i], if t >= 4 { 1.0 } else { 0.0 }, "row {t}");
        }
        let gap = vec![event(0, 0, 3, false), event(1, 4, 9, true)];
        assert!(matches!(
            assemble_features(&[], &gap, &power_table(vec![1.0; 10]), None, &cfg),
            Err(Error::AlignmentError(_))
        ));
    }

    #[test]
    fn match_features_read_history_at_offset() {
        let p: Vec<f64> = (0..8).map(f64::from).collect();
        let hist_p: Vec<f64> = (0..20).map(|i| 100.0 + i as f64).collect();
        let hist_s: Vec<f64> = (0..20).map(|i| 200.0 + i as f64).collect();
        let ev = vec![event(0, 0, 7, true)];
        let rec = MatchRecord {
            segment_index: 0,
            seg_start: 0,
            seg_end: 7,
            hist_start: 10,
            dtw_distance: 0.0,
            wind_str: 0.0,
            wind_tre: 0.0,
            wind_str_norm: 0.0,
            wind_tre_norm: 0.0,
            omega: 0.25,
        };
        let cfg = FeatureConfig {
            match_features: true,
            ..plain(2, vec![1])
        };
        let h = History {
            speed: &hist_s,
            power: &hist_p,
        };
        let m = assemble_features(std::slice::from_ref(&rec), &ev, &power_table(p.clone()), Some(h), &cfg).unwrap();
        let (lo, hi) = m.bounds[2];
        let raw: Vec<f64> = m.column("match_power").unwrap().iter().map(|v| lo + v * (hi - lo)).collect();
        let want: Vec<f64> = m.origins.iter().map(|&t| 100.0 + (10 + t + 2).min(19) as f64).collect();
        assert_eq!(raw, want);
        assert!(matches!(
            assemble_features(&[], &ev, &power_table(p.clone()), Some(h), &cfg),
            Err(Error::AlignmentError(_))
        ));
        assert!(assemble_features(&[rec], &ev, &power_table(p), None, &cfg).is_err());
    }

    #[test]
    fn assembly_is_deterministic() {
        let p: Vec<f64> = (0..30).map(|i| (i as f64 * 0.3).cos() + 1.5).collect();
        let cfg = plain(3, vec![1, 2]);
        let a = assemble_features(&[], &[], &power_table(p.clone()), None, &cfg).unwrap();
        let b = assemble_features(&[], &[], &power_table(p), None, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn persistence_examples() {
        let m = assemble_features(&[], &[], &power_table(vec![2.0; 10]), None, &plain(1, vec![1])).unwrap();
        assert_eq!(predict_persistence(&m, 5.0).unwrap().metrics.rmse, 0.0);

        let step: Vec<f64> = (0..10).map(|i| if i < 5 { 1.0 } else { 3.5 }).collect();
        let m = assemble_features(&[], &[], &power_table(step), None, &plain(1, vec![1])).unwrap();
        let r = predict_persistence(&m, 5.0).unwrap();
        let errs: Vec<f64> = r.actuals.iter().zip(&r.predictions).map(|(a, p)| a - p).collect();
        assert_eq!(errs.iter().filter(|&&e| e != 0.0).count(), 1);
        assert_eq!(errs[m.origins.iter().position(|&t| t == 4).unwrap()], 2.5);

        let r = predict_persistence(&m, 2.0).unwrap();
        assert!(r.predictions.iter().all(|&v| (0.0..=2.0).contains(&v)));
    }

    /// Matrix with features `x` and target `y` used directly.
    fn synthetic(x: Vec<Vec<f64>>, y: Vec<f64>) -> FeatureMatrix {
        let n = y.len();
        FeatureMatrix {
            names: (0..x.len()).map(|i| format!("x{i}")).collect(),
            bounds: vec![(0.0, 1.0); x.len()],
            columns: x,
            origins: (0..n).collect(),
            times: (0..n).map(|i| DateTime::from_timestamp(i as i64 * 900, 0).unwrap()).collect(),
            persistence: y.clone(),
            target: y,
            horizon: 1,
        }
    }

    #[test]
    fn exact_linear_target_is_recovered() {
        let n = 80;
        let x0: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() * 0.5 + 0.5).collect();
        let x1: Vec<f64> = (0..n).map(|i| ((i * 7 % 13) as f64) / 12.0).collect();
        let y: Vec<f64> = x0.iter().zip(&x1).map(|(a, b)| 1.0 + 2.0 * a - 0.5 * b).collect();
        let m = synthetic(vec![x0, x1], y);
        let r = fit_predict_linear(&m, 0.0, 0.7, 100.0).unwrap();
        assert!(rmse(&r.predictions, &r.actuals).unwrap() < 1e-8);
    }

    #[test]
    fn heavy_ridge_predicts_training_mean() {
        let n = 40;
        let x0: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let y: Vec<f64> = x0.iter().map(|v| 3.0 * v + 1.0).collect();
        let m = synthetic(vec![x0], y.clone());
        let mut model = Ridge::new(1e12).unwrap();
        model.fit(&m, 0..20).unwrap();
        assert!(model.coefficients.as_ref().unwrap()[0].abs() < 1e-9);
        let mean = y[..20].iter().sum::<f64>() / 20.0;
        assert!((model.intercept - mean).abs() < 1e-6);
    }

    #[test]
    fn ridge_is_reproducible_and_finite() {
        let n = 50;
        let x0: Vec<f64> = (0..n).map(|i| ((i * 31 % 17) as f64) / 16.0).collect();
        let y: Vec<f64> = (0..n).map(|i| ((i * 11 % 7) as f64) / 2.0).collect();
        let m = synthetic(vec![x0], y);
        let a = fit_predict_linear(&m, 1.0, 0.6, 10.0).unwrap();
        assert_eq!(a, fit_predict_linear(&m, 1.0, 0.6, 10.0).unwrap());
        assert!(a.predictions.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn singular_and_short_systems() {
        let n = 20;
        let x0: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let y = x0.clone();
        let m = synthetic(vec![x0.clone(), x0], y.clone());
        assert!(matches!(fit_predict_linear(&m, 0.0, 0.5, 10.0), Err(Error::SingularSystem)));
        assert!(fit_predict_linear(&m, 0.1, 0.5, 10.0).is_ok());

        let cols: Vec<Vec<f64>> = (0..5).map(|k| (0..n).map(|i| ((i * (k + 2)) % 7) as f64).collect()).collect();
        let m = synthetic(cols, y);
        assert!(matches!(
            fit_predict_linear(&m, 0.1, 0.15, 10.0),
            Err(Error::InsufficientRows { rows: 3, features: 5 })
        ));
    }

    #[test]
    fn split_never_leaks() {
        let p: Vec<f64> = (0..40).map(|i| (i as f64 * 0.2).sin() + 2.0).collect();
        let m = assemble_features(&[], &[], &power_table(p), None, &plain(2, vec![1, 2])).unwrap();
        let k = split_point(m.n_rows(), 0.7).unwrap();
        assert!(m.times[k - 1] < m.times[k]);
        let r = fit_predict_linear(&m, 0.1, 0.7, 3.0).unwrap();
        assert!(r.times.iter().all(|t| *t >= m.times[k]));
        assert!(split_point(10, 1.0).is_err());
        assert!(split_point(1, 0.5).is_err());
    }

    #[test]
    fn predictions_are_clamped() {
        let n = 30;
        let x0: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let y: Vec<f64> = x0.iter().map(|v| 20.0 * v - 5.0).collect();
        let m = synthetic(vec![x0], y);
        let r = fit_predict_linear(&m, 0.0, 0.5, 5.0).unwrap();
        assert!(r.predictions.iter().all(|&v| (0.0..=5.0).contains(&v)));
        assert!(r.predictions.contains(&5.0));
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_objective(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse_objective(&[0.0, 0.0], &[1.0, 3.0]).unwrap(), 5.0);
        let (p, a) = ([0.3, 1.7, 2.2], [1.0, 1.0, 4.0]);
        let r = rmse(&p, &a).unwrap();
        assert!((mse_objective(&p, &a).unwrap() - r * r).abs() < 1e-12);
        assert!(matches!(mse_objective(&[1.0], &[]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn report_csv_layout() {
        let m = assemble_features(&[], &[], &power_table(vec![1.0, 2.0, 3.0]), None, &plain(1, vec![1])).unwrap();
        let r = predict_persistence(&m, 5.0).unwrap();
        let mut out = Vec::new();
        r.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "timestamp,actual,predicted\n1970-01-01T00:15:00Z,2,1\n1970-01-01T00:30:00Z,3,2\n"
        );
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<ForecastReport>(&json).unwrap(), r);
    }
}
