//! Query-sparsity measures and probabilistic sparse attention, inference only.
//!
//! Scores are `q·k / √d`. Only the top-`s` queries by the sampled max-minus-mean
//! measure attend over all keys; the rest take the mean of the value rows.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionInput {
    /// `L_Q × d`.
    pub q: DMatrix<f64>,
    /// `L_K × d`.
    pub k: DMatrix<f64>,
    /// `L_K × d_v`.
    pub v: DMatrix<f64>,
    pub d: usize,
}

impl AttentionInput {
    pub fn new(q: DMatrix<f64>, k: DMatrix<f64>, v: DMatrix<f64>) -> Result<Self> {
        let d = q.ncols();
        if d == 0 || k.ncols() != d {
            return Err(Error::InvalidParameter(format!(
                "query and key widths must match and be positive, got {} and {}",
                q.ncols(),
                k.ncols()
            )));
        }
        if q.nrows() == 0 || k.nrows() == 0 || v.nrows() != k.nrows() || v.ncols() == 0 {
            return Err(Error::InvalidParameter(format!(
                "inconsistent shapes: Q {}x{}, K {}x{}, V {}x{}",
                q.nrows(),
                q.ncols(),
                k.nrows(),
                k.ncols(),
                v.nrows(),
                v.ncols()
            )));
        }
        if q.iter().chain(k.iter()).chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite attention input".into()));
        }
        Ok(Self { q, k, v, d })
    }

    pub fn l_q(&self) -> usize {
        self.q.nrows()
    }

    pub fn l_k(&self) -> usize {
        self.k.nrows()
    }
}

fn dot(q: &[f64], k: &DMatrix<f64>, j: usize) -> f64 {
    q.iter().enumerate().map(|(c, x)| x * k[(j, c)]).sum()
}

/// `q·k_j / √d` for every key row.
pub fn scaled_scores(q: &[f64], k: &DMatrix<f64>, d: usize) -> Vec<f64> {
    let scale = (d as f64).sqrt();
    (0..k.nrows()).map(|j| dot(q, k, j) / scale).collect()
}

fn log_sum_exp(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Log-sum-exp minus arithmetic mean of the scaled scores.
pub fn m_score(q: &[f64], k: &DMatrix<f64>, d: usize) -> f64 {
    let s = scaled_scores(q, k, d);
    log_sum_exp(&s) - mean(&s)
}

/// KL divergence of the query's attention distribution from uniform:
/// `m_score − ln L_K`.
pub fn kl_uniform_score(q: &[f64], k: &DMatrix<f64>, d: usize) -> f64 {
    m_score(q, k, d) - (k.nrows() as f64).ln()
}

/// Max minus mean of the scaled scores over the given key sample.
pub fn m_bar_score(q: &[f64], k_sample: &DMatrix<f64>, d: usize) -> f64 {
    let s = scaled_scores(q, k_sample, d);
    s.iter().copied().fold(f64::NEG_INFINITY, f64::max) - mean(&s)
}

fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Attention weights of one query over all keys.
pub fn attention_weights(q: &[f64], k: &DMatrix<f64>, d: usize) -> Vec<f64> {
    softmax(&scaled_scores(q, k, d))
}

fn attend_row(input: &AttentionInput, i: usize) -> DVector<f64> {
    let q: Vec<f64> = input.q.row(i).iter().copied().collect();
    let w = attention_weights(&q, &input.k, input.d);
    input.v.transpose() * DVector::from_vec(w)
}

/// `softmax(QKᵀ/√d) V`.
pub fn dense_attention(input: &AttentionInput) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(input.l_q(), input.v.ncols());
    for i in 0..input.l_q() {
        out.set_row(i, &attend_row(input, i).transpose());
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseAttention {
    pub output: DMatrix<f64>,
    /// Ascending query indices that attended over all keys.
    pub selected: Vec<usize>,
    pub m_bar: Vec<f64>,
    /// Dot products spent on scoring.
    pub dot_products: usize,
    pub samples_per_query: usize,
}

/// Keys sampled per query: `⌈⌈f · L_K ln L_K⌉ / L_Q⌉`, at least one.
pub fn samples_per_query(l_q: usize, l_k: usize, sample_factor: f64) -> usize {
    let total = (sample_factor * l_k as f64 * (l_k as f64).ln()).ceil().max(1.0) as usize;
    total.div_ceil(l_q).max(1)
}

/// Top-`s` indices by score, lower index first on ties, returned ascending.
pub fn top_s(scores: &[f64], s: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut top: Vec<usize> = order.into_iter().take(s).collect();
    top.sort_unstable();
    top
}

pub fn prob_sparse_attention(
    input: &AttentionInput,
    s: usize,
    sample_factor: f64,
    seed: u64,
) -> Result<SparseAttention> {
    let (l_q, l_k) = (input.l_q(), input.l_k());
    if s == 0 || s > l_q {
        return Err(Error::InvalidS { s, l_q });
    }
    if !(sample_factor > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sample_factor must be positive, got {sample_factor}"
        )));
    }
    let u = samples_per_query(l_q, l_k, sample_factor);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (input.d as f64).sqrt();
    let mut dot_products = 0;
    let m_bar: Vec<f64> = (0..l_q)
        .map(|i| {
            let q: Vec<f64> = input.q.row(i).iter().copied().collect();
            let scores: Vec<f64> = (0..u)
                .map(|_| dot(&q, &input.k, rng.random_range(0..l_k)) / scale)
                .collect();
            dot_products += u;
            scores.iter().copied().fold(f64::NEG_INFINITY, f64::max) - mean(&scores)
        })
        .collect();
    let selected = top_s(&m_bar, s);

    let v_mean = input.v.row_mean();
    let mut output = DMatrix::zeros(l_q, input.v.ncols());
    for i in 0..l_q {
        output.set_row(i, &v_mean);
    }
    for &i in &selected {
        output.set_row(i, &attend_row(input, i).transpose());
    }
    Ok(SparseAttention {
        output,
        selected,
        m_bar,
        dot_products,
        samples_per_query: u,
    })
}

/// Summary statistics printed by the attention benchmark.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub l: usize,
    pub d: usize,
    pub s: usize,
    pub seeds: usize,
    pub mean_overlap: f64,
    pub dot_products: usize,
    pub l_ln_l: f64,
    pub ratio: f64,
}

/// Standard-normal `rows × cols` matrix.
pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    use rand_distr::{Distribution, StandardNormal};
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Mean top-`s` agreement between full-sample `M̄` and `M` rankings over
/// Gaussian inputs, plus the sampled scoring cost at length `l`.
pub fn bench(l: usize, d: usize, s: usize, seeds: usize, sample_factor: f64) -> Result<BenchRow> {
    let mut overlap = 0.0;
    let mut dot_products = 0;
    for seed in 0..seeds as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = gaussian(l, d, &mut rng);
        let k = gaussian(l, d, &mut rng);
        let v = gaussian(l, d, &mut rng);
        let input = AttentionInput::new(q, k, v)?;
        let rows: Vec<Vec<f64>> = (0..l).map(|i| input.q.row(i).iter().copied().collect()).collect();
        let m: Vec<f64> = rows.iter().map(|q| m_score(q, &input.k, d)).collect();
        let mb: Vec<f64> = rows.iter().map(|q| m_bar_score(q, &input.k, d)).collect();
        let a = top_s(&m, s);
        let b = top_s(&mb, s);
        overlap += a.iter().filter(|i| b.contains(i)).count() as f64 / s as f64;
        dot_products = prob_sparse_attention(&input, s, sample_factor, seed)?.dot_products;
    }
    let l_ln_l = l as f64 * (l as f64).ln();
    Ok(BenchRow {
        l,
        d,
        s,
        seeds,
        mean_overlap: overlap / seeds as f64,
        dot_products,
        l_ln_l,
        ratio: dot_products as f64 / l_ln_l,
    })
}
