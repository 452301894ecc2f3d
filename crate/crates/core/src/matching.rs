//! DTW and FastDTW alignment, and similar-period retrieval scored with the
//! intensity difference (STR), trend difference (TRE) and similarity
//! coefficient Ω.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ramp::RampSegment;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WarpPath {
    pub pairs: Vec<(usize, usize)>,
}

impl WarpPath {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Starts at (0,0), ends at (n−1,m−1), unit steps only.
    pub fn is_valid(&self, n: usize, m: usize) -> bool {
        let (Some(&first), Some(&last)) = (self.pairs.first(), self.pairs.last()) else {
            return false;
        };
        first == (0, 0)
            && last == (n - 1, m - 1)
            && self.pairs.windows(2).all(|w| {
                let (di, dj) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
                matches!((di, dj), (1, 0) | (0, 1) | (1, 1))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub distance: f64,
    pub path: WarpPath,
}

/// Inclusive column range allowed in each row.
type Window = Vec<(usize, usize)>;

/// DP restricted to `window`; rows must have non-decreasing bounds, row 0 must
/// contain column 0 and the last row column m−1.
fn dtw_windowed(x: &[f64], y: &[f64], window: &Window) -> Alignment {
    let n = x.len();
    let m = y.len();
    let mut cost: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let (lo, hi) = window[i];
        let mut row = vec![f64::INFINITY; hi - lo + 1];
        for j in lo..=hi {
            let local = (x[i] - y[j]).abs();
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let mut b = f64::INFINITY;
                if i > 0 {
                    b = b.min(cell(&cost[i - 1], window[i - 1], j.wrapping_sub(1)));
                    b = b.min(cell(&cost[i - 1], window[i - 1], j));
                }
                if j > lo {
                    b = b.min(row[j - 1 - lo]);
                }
                b
            };
            row[j - lo] = best + local;
        }
        cost.push(row);
    }

    let mut pairs = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while (i, j) != (0, 0) {
        let diag = if i > 0 && j > 0 { cell(&cost[i - 1], window[i - 1], j - 1) } else { f64::INFINITY };
        let up = if i > 0 { cell(&cost[i - 1], window[i - 1], j) } else { f64::INFINITY };
        let left = if j > 0 { cell(&cost[i], window[i], j - 1) } else { f64::INFINITY };
        if diag <= up && diag <= left {
            i -= 1;
            j -= 1;
        } else if up <= left {
            i -= 1;
        } else {
            j -= 1;
        }
        pairs.push((i, j));
    }
    pairs.reverse();
    Alignment {
        distance: cost[n - 1][m - 1 - window[n - 1].0],
        path: WarpPath { pairs },
    }
}

fn cell(row: &[f64], (lo, hi): (usize, usize), j: usize) -> f64 {
    if j < lo || j > hi {
        f64::INFINITY
    } else {
        row[j - lo]
    }
}

fn check(x: &[f64], y: &[f64]) -> Result<()> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// Exact DTW with absolute-difference local cost.
pub fn dtw(x: &[f64], y: &[f64]) -> Result<Alignment> {
    check(x, y)?;
    Ok(dtw_windowed(x, y, &vec![(0, y.len() - 1); x.len()]))
}

/// Pairwise averages; an odd tail element is carried as is.
fn coarsen(x: &[f64]) -> Vec<f64> {
    x.chunks(2).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
}

/// Project a coarse path one resolution up and widen it by `radius` cells.
fn expand(path: &WarpPath, n: usize, m: usize, radius: usize) -> Window {
    let mut proj: Vec<(usize, usize)> = vec![(usize::MAX, 0); n];
    for &(ci, cj) in &path.pairs {
        for i in [2 * ci, 2 * ci + 1] {
            if i >= n {
                continue;
            }
            let lo = (2 * cj).min(m - 1);
            let hi = (2 * cj + 1).min(m - 1);
            let r = &mut proj[i];
            r.0 = r.0.min(lo);
            r.1 = r.1.max(hi);
        }
    }
    (0..n)
        .map(|i| {
            let a = i.saturating_sub(radius);
            let b = (i + radius).min(n - 1);
            let lo = proj[a..=b].iter().map(|r| r.0).min().unwrap();
            let hi = proj[a..=b].iter().map(|r| r.1).max().unwrap();
            (lo.saturating_sub(radius), (hi + radius).min(m - 1))
        })
        .collect()
}

/// Multiresolution DTW: solve exactly at the coarsest level, then refine inside
/// the projected path widened by `radius`.
pub fn fastdtw(x: &[f64], y: &[f64], radius: usize) -> Result<Alignment> {
    check(x, y)?;
    Ok(fastdtw_rec(x, y, radius))
}

fn fastdtw_rec(x: &[f64], y: &[f64], radius: usize) -> Alignment {
    let min_size = radius + 2;
    if x.len() <= min_size || y.len() <= min_size {
        return dtw_windowed(x, y, &vec![(0, y.len() - 1); x.len()]);
    }
    let coarse = fastdtw_rec(&coarsen(x), &coarsen(y), radius);
    let window = expand(&coarse.path, x.len(), y.len(), radius);
    dtw_windowed(x, y, &window)
}

fn same_len(h: &[f64], p: &[f64]) -> Result<()> {
    if h.len() != p.len() {
        return Err(Error::LengthMismatch {
            left: h.len(),
            right: p.len(),
        });
    }
    if h.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// Mean absolute level difference.
pub fn wind_str(h: &[f64], p: &[f64]) -> Result<f64> {
    same_len(h, p)?;
    Ok(h.iter().zip(p).map(|(a, b)| (a - b).abs()).sum::<f64>() / h.len() as f64)
}

/// Mean difference of forward slopes, `h` minus `p`.
pub fn wind_tre(h: &[f64], p: &[f64], dt: f64) -> Result<f64> {
    same_len(h, p)?;
    if h.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            found: h.len(),
        });
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let slopes = |s: &[f64]| s.windows(2).map(|w| (w[1] - w[0]) / dt).sum::<f64>();
    Ok((slopes(h) - slopes(p)) / (h.len() - 1) as f64)
}

/// `|s² + t²|` for `t > 0`, otherwise `|s² − t²|`.
pub fn omega(str_norm: f64, tre_norm: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&str_norm) || !(-1.0..=1.0).contains(&tre_norm) {
        return Err(Error::OutOfRange(format!(
            "omega needs str in [0,1] and tre in [-1,1], got ({str_norm}, {tre_norm})"
        )));
    }
    let s2 = str_norm * str_norm;
    let t2 = tre_norm * tre_norm;
    Ok(if tre_norm > 0.0 { (s2 + t2).abs() } else { (s2 - t2).abs() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stride {
    /// `max(1, len / 4)`.
    Quarter,
    Exact,
}

impl Stride {
    pub fn step(self, len: usize) -> usize {
        match self {
            Stride::Quarter => (len / 4).max(1),
            Stride::Exact => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchParams {
    pub radius: usize,
    pub stride: Stride,
    /// Slope denominator for TRE, in steps.
    pub dt: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            radius: 1,
            stride: Stride::Quarter,
            dt: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub segment_index: usize,
    pub seg_start: usize,
    pub seg_end: usize,
    pub hist_start: usize,
    pub dtw_distance: f64,
    pub wind_str: f64,
    pub wind_tre: f64,
    pub wind_str_norm: f64,
    pub wind_tre_norm: f64,
    pub omega: f64,
}

/// Best window origin in `historical` for `past`: lowest FastDTW distance,
/// earliest origin on ties.
pub fn best_window(past: &[f64], historical: &[f64], params: &MatchParams) -> Result<(usize, f64)> {
    check(past, historical)?;
    let len = past.len();
    if historical.len() < len {
        return Err(Error::HistoricalTooShort {
            needed: len,
            found: historical.len(),
        });
    }
    let last = historical.len() - len;
    let step = params.stride.step(len);
    let mut origins: Vec<usize> = (0..=last).step_by(step).collect();
    if *origins.last().unwrap() != last {
        origins.push(last);
    }
    let mut best = (0, f64::INFINITY);
    for h0 in origins {
        let d = fastdtw(past, &historical[h0..h0 + len], params.radius)?.distance;
        if d < best.1 {
            best = (h0, d);
        }
    }
    Ok(best)
}

/// One record per segment; STR is min-max normalised over the batch and TRE
/// scaled by the batch's largest |TRE|. A batch of one normalises to 0.
pub fn match_periods(
    segments: &[RampSegment],
    historical: &[f64],
    params: &MatchParams,
) -> Result<Vec<MatchRecord>> {
    if let Some(longest) = segments.iter().map(|s| s.len()).max() {
        if historical.len() < longest {
            return Err(Error::HistoricalTooShort {
                needed: longest,
                found: historical.len(),
            });
        }
    }
    let raw = segments
        .par_iter()
        .enumerate()
        .map(|(i, seg)| {
            let (h0, d) = best_window(&seg.values, historical, params)?;
            let h = &historical[h0..h0 + seg.len()];
            Ok(MatchRecord {
                segment_index: i,
                seg_start: seg.start_idx,
                seg_end: seg.end_idx,
                hist_start: h0,
                dtw_distance: d,
                wind_str: wind_str(h, &seg.values)?,
                wind_tre: wind_tre(h, &seg.values, params.dt)?,
                wind_str_norm: 0.0,
                wind_tre_norm: 0.0,
                omega: 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    normalize_batch(raw)
}

fn normalize_batch(mut records: Vec<MatchRecord>) -> Result<Vec<MatchRecord>> {
    if records.len() > 1 {
        let strs: Vec<f64> = records.iter().map(|r| r.wind_str).collect();
        let (lo, hi) = crate::series::min_max(&strs);
        let tre_scale = records.iter().map(|r| r.wind_tre.abs()).fold(0.0, f64::max);
        for r in &mut records {
            r.wind_str_norm = if hi > lo { (r.wind_str - lo) / (hi - lo) } else { 0.0 };
            r.wind_tre_norm = if tre_scale > 0.0 { r.wind_tre / tre_scale } else { 0.0 };
        }
    }
    for r in &mut records {
        r.omega = omega(r.wind_str_norm, r.wind_tre_norm)?;
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poles::ExtremaSet;
    use crate::ramp::segment_by_extrema;
    use crate::series::{SeriesKind, WindSeries};

    /// Full cost-table DP written out independently.
    fn oracle(x: &[f64], y: &[f64]) -> f64 {
        let (n, m) = (x.len(), y.len());
        let mut d = vec![vec![f64::INFINITY; m + 1]; n + 1];
        d[0][0] = 0.0;
        for i in 1..=n {
            for j in 1..=m {
                d[i][j] = (x[i - 1] - y[j - 1]).abs() + d[i - 1][j - 1].min(d[i - 1][j]).min(d[i][j - 1]);
            }
        }
        d[n][m]
    }

    fn path_cost(x: &[f64], y: &[f64], p: &WarpPath) -> f64 {
        p.pairs.iter().map(|&(i, j)| (x[i] - y[j]).abs()).sum()
    }

    #[test]
    fn dtw_examples() {
        let a = dtw(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(a.distance, 0.0);
        assert_eq!(a.path.pairs, vec![(0, 0), (1, 1), (2, 2)]);
        assert_eq!(dtw(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).unwrap().distance, 2.0);
        let b = dtw(&[5.0], &[1.0, 2.0]).unwrap();
        assert_eq!(b.distance, 7.0);
        assert_eq!(b.path.pairs, vec![(0, 0), (0, 1)]);
        assert!(matches!(dtw(&[], &[1.0]), Err(Error::EmptyInput)));
        assert!(matches!(fastdtw(&[1.0], &[], 1), Err(Error::EmptyInput)));
    }

    #[test]
    fn coarsen_carries_tail() {
        assert_eq!(coarsen(&[1.0, 3.0, 5.0, 7.0, 9.0]), vec![2.0, 6.0, 9.0]);
    }

    #[test]
    fn score_examples() {
        assert!((wind_str(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(wind_str(&[1.5, 2.0], &[1.5, 2.0]).unwrap(), 0.0);
        assert_eq!(wind_str(&[0.0], &[5.0]).unwrap(), 5.0);
        assert!(matches!(wind_str(&[0.0], &[5.0, 1.0]), Err(Error::LengthMismatch { .. })));

        assert_eq!(wind_tre(&[0.0, 2.0, 4.0], &[0.0, 1.0, 2.0], 1.0).unwrap(), 1.0);
        assert_eq!(wind_tre(&[3.0, 1.0, 4.0], &[3.0, 1.0, 4.0], 1.0).unwrap(), 0.0);
        assert!(matches!(wind_tre(&[1.0], &[1.0], 1.0), Err(Error::TooShort { .. })));
        assert!(matches!(wind_tre(&[1.0, 2.0], &[1.0], 1.0), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn omega_examples() {
        assert!((omega(0.5, 0.3).unwrap() - 0.34).abs() <= f64::EPSILON);
        assert_eq!(omega(0.5, -0.3).unwrap(), 0.16);
        assert_eq!(omega(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(omega(0.7, 0.0).unwrap(), 0.7 * 0.7);
        assert!(matches!(omega(1.1, 0.0), Err(Error::OutOfRange(_))));
        assert!(matches!(omega(0.5, -1.5), Err(Error::OutOfRange(_))));
        assert!(omega(f64::NAN, 0.0).is_err());
    }

    fn seg_series(v: Vec<f64>) -> Vec<RampSegment> {
        let s = WindSeries::from_values(v, SeriesKind::Derived).unwrap();
        segment_by_extrema(&s, &ExtremaSet::default()).unwrap()
    }

    #[test]
    fn copied_segment_is_found() {
        let past = vec![3.0, 4.5, 6.0, 5.0, 2.0, 1.0];
        let mut hist: Vec<f64> = (0..60).map(|i| 8.0 + (i as f64 * 0.37).sin()).collect();
        hist[23..29].copy_from_slice(&past);
        let params = MatchParams {
            stride: Stride::Exact,
            ..MatchParams::default()
        };
        let r = match_periods(&seg_series(past), &hist, &params).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].hist_start, 23);
        assert_eq!(r[0].dtw_distance, 0.0);
        assert_eq!(r[0].wind_str, 0.0);
        assert_eq!((r[0].wind_str_norm, r[0].wind_tre_norm, r[0].omega), (0.0, 0.0, 0.0));
    }

    #[test]
    fn single_record_batch_normalises_to_zero() {
        let past = vec![1.0, 2.0, 4.0];
        let hist = vec![9.0, 9.0, 9.5, 9.0, 8.0];
        let r = match_periods(&seg_series(past), &hist, &MatchParams::default()).unwrap();
        assert!(r[0].wind_str > 0.0 && r[0].wind_tre != 0.0);
        assert_eq!((r[0].wind_str_norm, r[0].wind_tre_norm), (0.0, 0.0));
    }

    #[test]
    fn short_history_is_rejected() {
        let err = match_periods(&seg_series(vec![1.0, 2.0, 3.0, 4.0]), &[1.0, 2.0], &MatchParams::default())
            .unwrap_err();
        assert!(matches!(err, Error::HistoricalTooShort { needed: 4, found: 2 }));
    }

    #[test]
    fn last_origin_is_always_scored() {
        let past = [5.0, 1.0, 5.0, 1.0, 5.0, 1.0, 5.0, 1.0];
        let mut hist = vec![3.0; 21];
        hist[13..].copy_from_slice(&past);
        let (h0, d) = best_window(&past, &hist, &MatchParams::default()).unwrap();
        assert_eq!((h0, d), (13, 0.0));
    }

    /// A wider search window can steer the coarse path into a worse basin.
    #[test]
    fn error_is_not_radius_monotone() {
        let x = [3.0, 5.0, 0.0, 2.0, 3.0];
        let y = [4.0, 4.0, 1.0, 5.0, 4.0, 3.0, 2.0];
        assert_eq!(fastdtw(&x, &y, 0).unwrap().distance, 8.0);
        assert_eq!(fastdtw(&x, &y, 1).unwrap().distance, 9.0);
        assert_eq!(dtw(&x, &y).unwrap().distance, 8.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn seq(max: usize) -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(-10.0f64..10.0, 1..max)
        }

        proptest! {
            #[test]
            fn dtw_matches_oracle_and_path(x in seq(30), y in seq(30)) {
                let a = dtw(&x, &y).unwrap();
                prop_assert!((a.distance - oracle(&x, &y)).abs() < 1e-9);
                prop_assert!(a.path.is_valid(x.len(), y.len()));
                prop_assert!((path_cost(&x, &y, &a.path) - a.distance).abs() < 1e-9);
            }

            #[test]
            fn dtw_symmetric_and_reflexive(x in seq(40), y in seq(40)) {
                prop_assert_eq!(dtw(&x, &y).unwrap().distance, dtw(&y, &x).unwrap().distance);
                prop_assert_eq!(dtw(&x, &x).unwrap().distance, 0.0);
            }

            #[test]
            fn fastdtw_bounded_by_exact(x in seq(70), y in seq(70), r in 0usize..4) {
                let exact = dtw(&x, &y).unwrap().distance;
                let fast = fastdtw(&x, &y, r).unwrap();
                prop_assert!(fast.distance >= exact - 1e-9);
                prop_assert!(fast.path.is_valid(x.len(), y.len()));
                prop_assert!((path_cost(&x, &y, &fast.path) - fast.distance).abs() < 1e-9);
                let wide = fastdtw(&x, &y, x.len().max(y.len())).unwrap().distance;
                prop_assert_eq!(wide, exact);
            }

            #[test]
            fn fastdtw_identical_is_zero(x in seq(70), r in 0usize..4) {
                prop_assert_eq!(fastdtw(&x, &x, r).unwrap().distance, 0.0);
            }

            #[test]
            fn tre_telescopes(pair in (2usize..50).prop_flat_map(|n| (
                prop::collection::vec(-20.0f64..20.0, n),
                prop::collection::vec(-20.0f64..20.0, n),
            )), dt in 0.1f64..5.0) {
                let (h, p) = pair;
                let c = h.len();
                let closed = ((h[c - 1] - h[0]) - (p[c - 1] - p[0])) / ((c - 1) as f64 * dt);
                prop_assert!((wind_tre(&h, &p, dt).unwrap() - closed).abs() <= 1e-12 * (1.0 + closed.abs()));
            }

            #[test]
            fn omega_monotone_in_str(a in 0.0f64..1.0, b in 0.0f64..1.0, t in 0.0f64..1.0) {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                if t > 0.0 {
                    prop_assert!(omega(lo, t).unwrap() <= omega(hi, t).unwrap());
                }
                prop_assert!(omega(a, t).unwrap() >= 0.0 && omega(a, -t).unwrap() >= 0.0);
            }

            #[test]
            fn every_segment_gets_a_valid_origin(
                v in prop::collection::vec(0.0f64..20.0, 4..60),
                hist in prop::collection::vec(0.0f64..20.0, 60..120),
            ) {
                let s = WindSeries::from_values(v, SeriesKind::Speed).unwrap();
                let ex = crate::poles::find_extrema(s.values()).unwrap();
                let segs = segment_by_extrema(&s, &ex).unwrap();
                let recs = match_periods(&segs, &hist, &MatchParams::default()).unwrap();
                prop_assert_eq!(recs.len(), segs.len());
                for (r, s) in recs.iter().zip(&segs) {
                    prop_assert!(r.hist_start + s.len() <= hist.len());
                    prop_assert!((0.0..=1.0).contains(&r.wind_str_norm));
                    prop_assert!((-1.0..=1.0).contains(&r.wind_tre_norm));
                    prop_assert!(r.omega >= 0.0 && r.dtw_distance >= 0.0);
                }
            }
        }
    }
}
