//! Daubechies-4 decimated wavelet filter bank with periodized boundaries,
//! detail-band soft thresholding and the resulting low-pass perturbation.

use crate::error::{ensure, Error, Result};
use crate::series::Series;

/// Analysis and reconstruction filters of an orthonormal two-channel bank.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    /// Low-pass analysis filter `g`.
    pub lo: Vec<f64>,
    /// High-pass analysis filter `h[k] = (-1)^k g[K-1-k]`.
    pub hi: Vec<f64>,
    /// Low-pass reconstruction filter (time-reversed `g`).
    pub lo_rec: Vec<f64>,
    /// High-pass reconstruction filter (time-reversed `h`).
    pub hi_rec: Vec<f64>,
}

impl FilterBank {
    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }
}

/// The four-tap Daubechies filters from their closed form
/// `(1+√3, 3+√3, 3−√3, 1−√3) / (4√2)`.
pub fn d4_filters() -> FilterBank {
    let r3 = 3f64.sqrt();
    let denom = 4.0 * 2f64.sqrt();
    let lo = vec![
        (1.0 + r3) / denom,
        (3.0 + r3) / denom,
        (3.0 - r3) / denom,
        (1.0 - r3) / denom,
    ];
    let k = lo.len();
    let hi: Vec<f64> = (0..k)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            sign * lo[k - 1 - i]
        })
        .collect();
    let lo_rec = lo.iter().rev().copied().collect();
    let hi_rec = hi.iter().rev().copied().collect();
    FilterBank { lo, hi, lo_rec, hi_rec }
}

/// Deepest useful decomposition `⌊log₂(M/K)⌋`, clamped to at least 1.
pub fn max_level(len: usize, filter_len: usize) -> Result<usize> {
    ensure!(filter_len >= 1, "filter length must be positive");
    ensure!(
        len >= filter_len,
        "series length {len} is shorter than the filter length {filter_len}"
    );
    let mut level = 0;
    while filter_len << (level + 1) <= len {
        level += 1;
    }
    Ok(level.max(1))
}

/// Approximation plus detail bands of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletPyramid {
    pub approx: Vec<f64>,
    /// `details[j]` holds level `j+1`; index 0 is the finest band.
    pub details: Vec<Vec<f64>>,
    /// Coefficient count per level, finest first.
    pub level_lengths: Vec<usize>,
    pub original_length: usize,
}

impl WaveletPyramid {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    fn validate(&self) -> Result<()> {
        let levels = self.details.len();
        ensure!(levels >= 1, "pyramid has no detail bands");
        ensure!(
            self.level_lengths.len() == levels,
            "pyramid records {} level lengths for {} bands",
            self.level_lengths.len(),
            levels
        );
        let mut expected = self.original_length;
        for (j, (&n, d)) in self.level_lengths.iter().zip(&self.details).enumerate() {
            expected = expected.div_ceil(2);
            ensure!(
                n == expected && d.len() == n,
                "level {} has {} coefficients (recorded {}), expected {}",
                j + 1,
                d.len(),
                n,
                expected
            );
        }
        ensure!(
            self.approx.len() == expected,
            "approximation has {} coefficients, expected {}",
            self.approx.len(),
            expected
        );
        Ok(())
    }
}

/// One analysis step: circular correlation with `g` and `h`, stride 2.
/// Odd-length input is first extended by one sample taken circularly
/// (its first value), so both outputs have `ceil(n/2)` coefficients.
pub fn dwt_step(signal: &[f64], bank: &FilterBank) -> Result<(Vec<f64>, Vec<f64>)> {
    ensure!(
        signal.len() >= 2,
        "dwt step needs at least 2 samples, got {}",
        signal.len()
    );
    let n = signal.len() + signal.len() % 2;
    let at = |i: usize| signal[(i % n) % signal.len()];
    let half = n / 2;
    let mut approx = Vec::with_capacity(half);
    let mut detail = Vec::with_capacity(half);
    for i in 0..half {
        let (mut a, mut d) = (0.0, 0.0);
        for (k, (&g, &h)) in bank.lo.iter().zip(&bank.hi).enumerate() {
            let x = at(2 * i + k);
            a += g * x;
            d += h * x;
        }
        approx.push(a);
        detail.push(d);
    }
    Ok((approx, detail))
}

/// Inverse of [`dwt_step`]: zero-insertion upsampling of both bands, circular
/// filtering with the reconstruction pair, summed and trimmed to `out_len`.
pub fn idwt_step(approx: &[f64], detail: &[f64], out_len: usize, bank: &FilterBank) -> Result<Vec<f64>> {
    ensure!(
        approx.len() == detail.len(),
        "band lengths differ: {} vs {}",
        approx.len(),
        detail.len()
    );
    let n = 2 * approx.len();
    ensure!(
        out_len == n || out_len + 1 == n,
        "cannot restore {out_len} samples from {} coefficients",
        approx.len()
    );
    let mut up_a = vec![0.0; n];
    let mut up_d = vec![0.0; n];
    for i in 0..approx.len() {
        up_a[2 * i] = approx[i];
        up_d[2 * i] = detail[i];
    }
    let k = bank.len();
    let mut out = Vec::with_capacity(out_len);
    for m in 0..out_len {
        let mut v = 0.0;
        for j in 0..k {
            // (m + j − (K−1)) mod n, kept non-negative.
            let idx = (m + j + n * k - (k - 1)) % n;
            v += bank.lo_rec[j] * up_a[idx] + bank.hi_rec[j] * up_d[idx];
        }
        out.push(v);
    }
    Ok(out)
}

/// Multilevel decomposition into `levels` detail bands.
pub fn decompose(signal: &[f64], levels: usize, bank: &FilterBank) -> Result<WaveletPyramid> {
    ensure!(levels >= 1, "decomposition needs at least one level");
    let deepest = max_level(signal.len(), bank.len())?;
    ensure!(
        levels <= deepest,
        "{levels} levels requested but a length-{} signal supports at most {deepest}",
        signal.len()
    );
    let mut approx = signal.to_vec();
    let mut details = Vec::with_capacity(levels);
    let mut level_lengths = Vec::with_capacity(levels);
    for _ in 0..levels {
        let (a, d) = dwt_step(&approx, bank)?;
        level_lengths.push(a.len());
        details.push(d);
        approx = a;
    }
    Ok(WaveletPyramid {
        approx,
        details,
        level_lengths,
        original_length: signal.len(),
    })
}

/// Inverse multilevel transform; output length equals `original_length`.
pub fn reconstruct(pyramid: &WaveletPyramid, bank: &FilterBank) -> Result<Vec<f64>> {
    pyramid.validate()?;
    let mut current = pyramid.approx.clone();
    for j in (0..pyramid.levels()).rev() {
        let target = if j == 0 {
            pyramid.original_length
        } else {
            pyramid.level_lengths[j - 1]
        };
        current = idwt_step(&current, &pyramid.details[j], target, bank)?;
    }
    Ok(current)
}

/// Soft shrinkage `sign(d)·max(|d| − γ, 0)`.
pub fn soft_threshold(detail: &[f64], gamma: f64) -> Vec<f64> {
    detail
        .iter()
        .map(|&d| {
            if d.abs() > gamma {
                d.signum() * (d.abs() - gamma)
            } else {
                0.0
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Levels {
    /// Deepest level the channel length allows.
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbConfig {
    /// Threshold as a fraction of the channel's peak magnitude; `0 ≤ α < 1`.
    pub alpha: f64,
    pub levels: Levels,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig {
            alpha: 0.2,
            levels: Levels::Auto,
        }
    }
}

/// Low-pass perturbed copy of one channel: threshold `γ = α·max|x|` applied
/// to every detail band.
pub fn perturb_channel(channel: &[f64], cfg: &PerturbConfig, bank: &FilterBank) -> Result<Vec<f64>> {
    ensure!(
        (0.0..1.0).contains(&cfg.alpha),
        "threshold fraction must lie in [0, 1), got {}",
        cfg.alpha
    );
    let levels = match cfg.levels {
        Levels::Auto => max_level(channel.len(), bank.len())?,
        Levels::Fixed(l) => {
            max_level(channel.len(), bank.len())?;
            l
        }
    };
    let peak = channel.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !peak.is_finite() {
        return Err(Error::NumericFailure("non-finite value in series".into()));
    }
    let gamma = cfg.alpha * peak;
    if gamma == 0.0 {
        return Ok(channel.to_vec());
    }
    let mut pyramid = decompose(channel, levels, bank)?;
    for d in &mut pyramid.details {
        *d = soft_threshold(d, gamma);
    }
    reconstruct(&pyramid, bank)
}

/// Applies [`perturb_channel`] to every feature; output shape equals input.
pub fn perturb(x: &Series, cfg: &PerturbConfig, bank: &FilterBank) -> Result<Series> {
    let channels = x
        .channels()
        .iter()
        .map(|c| perturb_channel(c, cfg, bank))
        .collect::<Result<Vec<_>>>()?;
    Series::from_channels(&channels)
}
