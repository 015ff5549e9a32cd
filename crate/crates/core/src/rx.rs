//! Global Reed-Xiaoli (RX) anomaly detector.
//!
//! Every pixel `r` is scored by its Mahalanobis distance to the image mean,
//! `α(r) = (r − μ)ᵀ K⁻¹ (r − μ)`, with `K` the population covariance of the
//! image (divided by the pixel count). With that normalization the mean score
//! over all pixels is exactly the channel count.
//!
//! The RX threshold `t` is a percentile: the cutoff is the `t`-th percentile
//! of the scores and pixels strictly above it are anomalous, so `t = 99`
//! flags the top 1%.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::raster::{Mask, Raster};

/// Default relative covariance regularization, scaled by `trace(K)/n`.
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RxScores {
    /// One score per pixel. Pixels excluded from the statistics score `0`.
    pub scores: Raster<f64>,
    pub channel_count: usize,
    pub mean: Vec<f64>,
    /// Row-major `n x n`, as used (after regularization).
    pub covariance: Vec<f64>,
    pub regularization_used: f64,
    /// Pixels that took part in the statistics, `None` when all did.
    pub valid: Option<Vec<bool>>,
}

impl RxScores {
    fn is_valid(&self, i: usize) -> bool {
        self.valid.as_ref().is_none_or(|v| v[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyMask {
    pub mask: Mask,
    /// Percentile in `[0, 100]`.
    pub threshold_t: f64,
    pub cutoff_score: f64,
}

pub fn rx_score(image: &Raster<f64>, epsilon: f64) -> Result<RxScores> {
    rx_score_masked(image, None, epsilon)
}

/// RX scores with statistics restricted to pixels where `valid` is set.
pub fn rx_score_masked(image: &Raster<f64>, valid: Option<&[bool]>, epsilon: f64) -> Result<RxScores> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("epsilon", "must be finite and >= 0"));
    }
    let n = image.channels();
    let pixels = image.pixel_count();
    if let Some(v) = valid {
        if v.len() != pixels {
            return Err(Error::invalid("valid", "length does not match the image"));
        }
    }
    let use_px = |i: usize| valid.is_none_or(|v| v[i]);
    let count = valid.map_or(pixels, |v| v.iter().filter(|&&b| b).count());
    if count < n + 1 {
        return Err(Error::TooFewPixels {
            pixels: count,
            required: n + 1,
        });
    }
    let data = image.data();

    let mut mean = vec![0.0; n];
    for (i, px) in data.chunks_exact(n).enumerate() {
        if use_px(i) {
            for (m, &x) in mean.iter_mut().zip(px) {
                *m += x;
            }
        }
    }
    for m in &mut mean {
        *m /= count as f64;
    }

    let mut cov = vec![0.0; n * n];
    let mut centered = vec![0.0; n];
    for (i, px) in data.chunks_exact(n).enumerate() {
        if !use_px(i) {
            continue;
        }
        for k in 0..n {
            centered[k] = px[k] - mean[k];
        }
        for a in 0..n {
            for b in a..n {
                cov[a * n + b] += centered[a] * centered[b];
            }
        }
    }
    for a in 0..n {
        for b in a..n {
            let v = cov[a * n + b] / count as f64;
            cov[a * n + b] = v;
            cov[b * n + a] = v;
        }
    }

    let trace: f64 = (0..n).map(|k| cov[k * n + k]).sum();
    // Rounding in the mean leaves a tiny variance on constant images.
    let energy = trace + mean.iter().map(|m| m * m).sum::<f64>();
    if !(trace > energy * 1e-24) {
        return Err(Error::SingularCovariance);
    }
    let regularization = epsilon * trace / n as f64;
    for k in 0..n {
        cov[k * n + k] += regularization;
    }
    let inverse = invert_spd(&cov, n).ok_or(Error::SingularCovariance)?;

    let mut scores = Vec::with_capacity(pixels);
    if n == 1 {
        let (mu, inv) = (mean[0], inverse[0]);
        for (i, &x) in data.iter().enumerate() {
            let d = x - mu;
            scores.push(if use_px(i) { d * d * inv } else { 0.0 });
        }
    } else {
        for (i, px) in data.chunks_exact(n).enumerate() {
            if !use_px(i) {
                scores.push(0.0);
                continue;
            }
            for k in 0..n {
                centered[k] = px[k] - mean[k];
            }
            let mut alpha = 0.0;
            for a in 0..n {
                let mut row = 0.0;
                for b in 0..n {
                    row += inverse[a * n + b] * centered[b];
                }
                alpha += centered[a] * row;
            }
            scores.push(if alpha > 0.0 { alpha } else { 0.0 });
        }
    }

    Ok(RxScores {
        scores: Raster::from_vec(image.width(), image.height(), 1, scores)?,
        channel_count: n,
        mean,
        covariance: cov,
        regularization_used: regularization,
        valid: valid.map(|v| v.to_vec()),
    })
}

/// Inverts a symmetric matrix with Gauss-Jordan elimination and partial
/// pivoting. Returns `None` when a pivot vanishes relative to the diagonal.
fn invert_spd(m: &[f64], n: usize) -> Option<Vec<f64>> {
    let scale = (0..n).map(|k| math::abs(m[k * n + k])).fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let tol = scale * 1e-13;
    let mut a = m.to_vec();
    let mut inv = vec![0.0; n * n];
    for k in 0..n {
        inv[k * n + k] = 1.0;
    }
    for col in 0..n {
        let pivot_row = (col..n).max_by(|&i, &j| math::abs(a[i * n + col]).total_cmp(&math::abs(a[j * n + col])))?;
        let pivot = a[pivot_row * n + col];
        if !(math::abs(pivot) > tol) {
            return None;
        }
        if pivot_row != col {
            for j in 0..n {
                a.swap(col * n + j, pivot_row * n + j);
                inv.swap(col * n + j, pivot_row * n + j);
            }
        }
        let p = 1.0 / pivot;
        for j in 0..n {
            a[col * n + j] *= p;
            inv[col * n + j] *= p;
        }
        for i in 0..n {
            if i == col {
                continue;
            }
            let f = a[i * n + col];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                a[i * n + j] -= f * a[col * n + j];
                inv[i * n + j] -= f * inv[col * n + j];
            }
        }
    }
    Some(inv)
}

/// Linear-interpolated order statistic of `values` at percentile `t`.
///
/// Reorders `values`.
pub fn percentile(values: &mut [f64], t: f64) -> f64 {
    let n = values.len();
    debug_assert!(n > 0);
    let pos = t / 100.0 * (n - 1) as f64;
    let lo = (math::floor(pos) as usize).min(n - 1);
    let frac = pos - lo as f64;
    let (_, lo_val, upper) = values.select_nth_unstable_by(lo, f64::total_cmp);
    let lo_val = *lo_val;
    if frac == 0.0 || upper.is_empty() {
        return lo_val;
    }
    let hi_val = upper.iter().copied().fold(f64::INFINITY, f64::min);
    lo_val + frac * (hi_val - lo_val)
}

/// Flags pixels whose score is strictly above the `t`-th percentile.
pub fn threshold_mask(scores: &RxScores, t: f64) -> Result<AnomalyMask> {
    if !(0.0..=100.0).contains(&t) {
        return Err(Error::invalid("t", "must be a percentile in [0, 100]"));
    }
    let s = scores.scores.data();
    let mut pool: Vec<f64> = match &scores.valid {
        None => s.to_vec(),
        Some(v) => s.iter().zip(v).filter(|(_, &ok)| ok).map(|(&a, _)| a).collect(),
    };
    let (w, h) = (scores.scores.width(), scores.scores.height());
    if pool.is_empty() {
        return Ok(AnomalyMask {
            mask: Raster::filled(w, h, 1, false),
            threshold_t: t,
            cutoff_score: f64::INFINITY,
        });
    }
    let cutoff = percentile(&mut pool, t);
    let bits = s
        .iter()
        .enumerate()
        .map(|(i, &a)| scores.is_valid(i) && a > cutoff)
        .collect();
    Ok(AnomalyMask {
        mask: Raster::from_vec(w, h, 1, bits)?,
        threshold_t: t,
        cutoff_score: cutoff,
    })
}

pub fn rx_detect(image: &Raster<f64>, t: f64, epsilon: f64) -> Result<AnomalyMask> {
    threshold_mask(&rx_score(image, epsilon)?, t)
}
