//! Vector primitives shared by the encoders and the evaluation code.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::numeric::matrix::{dot, norm};

/// Norms below this are treated as zero.
pub const ZERO_NORM: f64 = 1e-12;

pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>> {
    let n = norm(v);
    if !(n >= ZERO_NORM) {
        return Err(Error::ZeroVector);
    }
    Ok(v.iter().map(|x| x / n).collect())
}

/// Cosine similarity, clamped to [-1, 1].
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let na = norm(a);
    let nb = norm(b);
    if !(na >= ZERO_NORM && nb >= ZERO_NORM) {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Euclidean distance between the L2-normalized inputs, in [0, 2].
pub fn distance_g(x: &[f64], w: &[f64]) -> Result<f64> {
    if x.len() != w.len() {
        return Err(Error::LengthMismatch(x.len(), w.len()));
    }
    let xn = l2_normalize(x)?;
    let wn = l2_normalize(w)?;
    let sq: f64 = xn.iter().zip(&wn).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sq.sqrt().min(2.0))
}

/// `2 - g(x, w)` computed through the cosine form; always in [0, 2].
#[inline]
pub fn distance_activation(cos: f64) -> f64 {
    2.0 - (2.0 - 2.0 * cos).max(0.0).sqrt()
}

/// Total order used for Top-K: larger value first, then lower index.
#[inline]
fn topk_order(v: &[f64], a: usize, b: usize) -> Ordering {
    v[b].partial_cmp(&v[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b))
}

/// Indices of the `k` largest entries, ascending by index. Ties go to the
/// lower index.
pub fn topk_indices(v: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > v.len() {
        return Err(Error::BadK { k, len: v.len() });
    }
    let mut idx: Vec<usize> = (0..v.len()).collect();
    if k < v.len() {
        idx.select_nth_unstable_by(k - 1, |&a, &b| topk_order(v, a, b));
        idx.truncate(k);
    }
    idx.sort_unstable();
    Ok(idx)
}

/// Keeps the `k` largest entries at their values and zeroes the rest.
pub fn topk_sparsify(v: &[f64], k: usize) -> Result<Vec<f64>> {
    let keep = topk_indices(v, k)?;
    let mut out = vec![0.0; v.len()];
    for i in keep {
        out[i] = v[i];
    }
    Ok(out)
}

pub fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![0.0; v.len()];
    }
    let mut out: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= sum);
    out
}

/// `log Σ exp(v)` with max subtraction.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
