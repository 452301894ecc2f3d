//! Variational mode decomposition.
//!
//! The signal is mirror-extended to twice its length, transformed once, and
//! the modes are then updated in the frequency domain: a Wiener filter of the
//! residual around each center frequency, a power-weighted centroid for the
//! center frequency, and dual ascent on the reconstruction constraint. Only the
//! non-negative half of the spectrum is carried; modes are rebuilt with
//! Hermitian symmetry and the mirror extension is cut away.

use chrono::{DateTime, Utc};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{SeriesKind, WindSeries};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VmdParams {
    /// Number of modes.
    pub k: usize,
    /// Bandwidth penalty.
    pub alpha: f64,
    /// Dual ascent step; 0 leaves the reconstruction constraint slack.
    pub tau_dual: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for VmdParams {
    fn default() -> Self {
        Self {
            k: 8,
            alpha: 2000.0,
            tau_dual: 0.0,
            tol: 1e-7,
            max_iter: 500,
        }
    }
}

impl VmdParams {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("K must be at least 1".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if !(self.tau_dual >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tau_dual must be non-negative, got {}",
                self.tau_dual
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Modes ordered by ascending center frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    pub modes: Vec<Vec<f64>>,
    /// Cycles per sample, in `[0, 0.5]`.
    pub center_freqs: Vec<f64>,
    /// `‖x − Σ modes‖ / ‖x‖`.
    pub residual_norm: f64,
    pub iterations: usize,
    pub start_time: DateTime<Utc>,
    pub step_s: i64,
}

impl ModeSet {
    pub fn k(&self) -> usize {
        self.modes.len()
    }

    pub fn len(&self) -> usize {
        self.modes.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Build a mode set from precomputed components (no decomposition run).
    pub fn from_modes(modes: Vec<Vec<f64>>, center_freqs: Vec<f64>) -> Result<Self> {
        if modes.is_empty() || modes.len() != center_freqs.len() {
            return Err(Error::InvalidParameter(
                "need one center frequency per mode and at least one mode".into(),
            ));
        }
        let n = modes[0].len();
        if n == 0 || modes.iter().any(|m| m.len() != n) {
            return Err(Error::InvalidParameter("modes must share a non-zero length".into()));
        }
        Ok(Self {
            modes,
            center_freqs,
            residual_norm: 0.0,
            iterations: 0,
            start_time: DateTime::UNIX_EPOCH,
            step_s: crate::series::DEFAULT_STEP_S,
        })
    }
}

pub fn vmd_decompose(series: &WindSeries, params: &VmdParams) -> Result<ModeSet> {
    params.validate()?;
    let signal = series.values();
    let t = signal.len();
    if t < 4 * params.k {
        return Err(Error::TooShort {
            needed: 4 * params.k,
            found: t,
        });
    }
    let k = params.k;

    // mirror extension: rev(x[..h]) ++ x ++ rev(x[h..])
    let h = t / 2;
    let n = 2 * t;
    let mut spectrum: Vec<Complex64> = signal[..h]
        .iter()
        .rev()
        .chain(signal)
        .chain(signal[h..].iter().rev())
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut spectrum);

    // non-negative half: bins 0..n/2 with frequency j/n
    let half = n / 2;
    let f_plus: Vec<Complex64> = spectrum[..half].to_vec();
    let freqs: Vec<f64> = (0..half).map(|j| j as f64 / n as f64).collect();

    let mut omega: Vec<f64> = (0..k).map(|i| 0.5 / k as f64 * i as f64).collect();
    let mut u: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); half]; k];
    let mut lambda = vec![Complex64::new(0.0, 0.0); half];
    let mut sum_all = vec![Complex64::new(0.0, 0.0); half];

    let mut iterations = 0;
    while iterations < params.max_iter {
        iterations += 1;
        let mut change = 0.0;
        for m in 0..k {
            let prev = std::mem::take(&mut u[m]);
            let mut next = Vec::with_capacity(half);
            let (mut num, mut den) = (0.0, 0.0);
            for j in 0..half {
                // residual with every other mode at its latest value
                let others = sum_all[j] - prev[j];
                let d = freqs[j] - omega[m];
                let v = (f_plus[j] - others - lambda[j] * 0.5) / (1.0 + params.alpha * d * d);
                let p = v.norm_sqr();
                num += freqs[j] * p;
                den += p;
                sum_all[j] = others + v;
                next.push(v);
            }
            if den > 0.0 {
                omega[m] = num / den;
            }
            let diff: f64 = next.iter().zip(&prev).map(|(a, b)| (a - b).norm_sqr()).sum();
            let base: f64 = prev.iter().map(Complex64::norm_sqr).sum();
            change += if base > 0.0 {
                diff / base
            } else if diff > 0.0 {
                1.0
            } else {
                0.0
            };
            u[m] = next;
        }
        if params.tau_dual > 0.0 {
            for j in 0..half {
                lambda[j] += (sum_all[j] - f_plus[j]) * params.tau_dual;
            }
        }
        if change < params.tol {
            break;
        }
    }

    // Hermitian rebuild, inverse transform, cut the mirror
    let inverse = planner.plan_fft_inverse(n);
    let mut modes: Vec<(f64, Vec<f64>)> = u
        .iter()
        .zip(&omega)
        .map(|(um, &w)| {
            let mut full = vec![Complex64::new(0.0, 0.0); n];
            full[..half].copy_from_slice(um);
            for j in 1..half {
                full[n - j] = um[j].conj();
            }
            full[0] = Complex64::new(um[0].re, 0.0);
            inverse.process(&mut full);
            let values = full[h..h + t].iter().map(|c| c.re / n as f64).collect();
            (w.clamp(0.0, 0.5), values)
        })
        .collect();
    modes.sort_by(|a, b| a.0.total_cmp(&b.0));

    let (center_freqs, modes): (Vec<f64>, Vec<Vec<f64>>) = modes.into_iter().unzip();
    let residual_norm = relative_residual(signal, &modes);
    Ok(ModeSet {
        modes,
        center_freqs,
        residual_norm,
        iterations,
        start_time: series.start_time(),
        step_s: series.step_s(),
    })
}

fn relative_residual(signal: &[f64], modes: &[Vec<f64>]) -> f64 {
    let mut err = 0.0;
    let mut norm = 0.0;
    for (i, &x) in signal.iter().enumerate() {
        let s: f64 = modes.iter().map(|m| m[i]).sum();
        err += (x - s) * (x - s);
        norm += x * x;
    }
    if norm > 0.0 {
        (err / norm).sqrt()
    } else {
        err.sqrt()
    }
}

/// Pointwise sum of the modes at zero-based indices `keep`.
pub fn reconstruct(modes: &ModeSet, keep: &[usize]) -> Result<WindSeries> {
    if keep.is_empty() {
        return Err(Error::EmptySelection);
    }
    if let Some(&bad) = keep.iter().find(|&&i| i >= modes.k()) {
        return Err(Error::InvalidParameter(format!(
            "mode index {bad} out of range for K={}",
            modes.k()
        )));
    }
    let mut out = vec![0.0; modes.len()];
    for &i in keep {
        for (o, v) in out.iter_mut().zip(&modes.modes[i]) {
            *o += v;
        }
    }
    WindSeries::new(
        out,
        modes.start_time,
        modes.step_s,
        SeriesKind::Derived,
        "reconstructed",
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn series(values: Vec<f64>) -> WindSeries {
        WindSeries::from_values(values, SeriesKind::Derived).unwrap()
    }

    fn tone(n: usize, f: f64) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * f * i as f64).sin()).collect()
    }

    #[test]
    fn too_short_is_rejected() {
        let s = series(vec![1.0; 15]);
        assert!(matches!(
            vmd_decompose(&s, &VmdParams::with_k(4)),
            Err(Error::TooShort { needed: 16, found: 15 })
        ));
    }

    #[test]
    fn constant_series_is_dc_mode() {
        let s = series(vec![6.5; 64]);
        let m = vmd_decompose(&s, &VmdParams::with_k(1)).unwrap();
        assert_eq!(m.k(), 1);
        assert!(m.center_freqs[0].abs() < 1e-9);
        for v in &m.modes[0] {
            assert!((v - 6.5).abs() < 1e-9);
        }
        assert!(m.residual_norm < 1e-9);
    }

    #[test]
    fn single_mode_shapes() {
        let s = series(tone(128, 0.1));
        let m = vmd_decompose(&s, &VmdParams::with_k(3)).unwrap();
        assert_eq!(m.k(), 3);
        assert!(m.modes.iter().all(|x| x.len() == 128));
        assert!(m.center_freqs.windows(2).all(|w| w[0] <= w[1]));
        assert!(m.center_freqs.iter().all(|&f| (0.0..=0.5).contains(&f)));
        assert!(m.residual_norm >= 0.0);
    }

    #[test]
    fn max_iter_is_not_an_error() {
        let s = series(tone(256, 0.07));
        let p = VmdParams {
            max_iter: 3,
            ..VmdParams::with_k(2)
        };
        let m = vmd_decompose(&s, &p).unwrap();
        assert_eq!(m.iterations, 3);
    }

    #[test]
    fn odd_length_is_supported() {
        let s = series(tone(201, 0.05));
        let m = vmd_decompose(&s, &VmdParams::with_k(1)).unwrap();
        assert_eq!(m.len(), 201);
        assert!((m.center_freqs[0] - 0.05).abs() < 0.005);
    }

    #[test]
    fn reconstruct_examples() {
        let m = ModeSet::from_modes(
            vec![vec![1.0, 2.0], vec![10.0, 20.0], vec![100.0, 200.0]],
            vec![0.0, 0.1, 0.2],
        )
        .unwrap();
        assert_eq!(reconstruct(&m, &[0, 1]).unwrap().values(), &[11.0, 22.0]);
        assert!(matches!(reconstruct(&m, &[]), Err(Error::EmptySelection)));
        assert!(reconstruct(&m, &[3]).is_err());

        let one = ModeSet::from_modes(vec![vec![3.0, 4.0]], vec![0.0]).unwrap();
        assert_eq!(reconstruct(&one, &[0]).unwrap().values(), &[3.0, 4.0]);
    }

    #[test]
    fn reconstruct_all_matches_residual() {
        let x = tone(256, 0.03);
        let s = series(x.clone());
        let m = vmd_decompose(&s, &VmdParams::with_k(2)).unwrap();
        let all = reconstruct(&m, &[0, 1]).unwrap();
        let err: f64 = x.iter().zip(all.values()).map(|(a, b)| (a - b).powi(2)).sum();
        let norm: f64 = x.iter().map(|a| a * a).sum();
        assert!(((err / norm).sqrt() - m.residual_norm).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn reconstruct_is_linear(
                modes in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 8), 4),
                split in 1usize..4,
            ) {
                let k = modes.len();
                let m = ModeSet::from_modes(modes, vec![0.0; k]).unwrap();
                let a: Vec<usize> = (0..split).collect();
                let b: Vec<usize> = (split..k).collect();
                let all: Vec<usize> = (0..k).collect();
                let ra = reconstruct(&m, &a).unwrap();
                let rb = reconstruct(&m, &b).unwrap();
                let rab = reconstruct(&m, &all).unwrap();
                for i in 0..8 {
                    prop_assert!((ra.values()[i] + rb.values()[i] - rab.values()[i]).abs() < 1e-12);
                }
            }
        }
    }
}
