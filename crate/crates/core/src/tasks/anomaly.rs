//! Abnormal scores from three encoder passes and the streaming,
//! delay-adjusted detection protocol.

use serde::{Deserialize, Serialize};

use super::preprocess::difference;
use super::FrozenEncoder;
use crate::checkpoint::Checkpoint;
use crate::error::{ensure, Result};
use crate::series::Series;
use crate::wavelet::{d4_filters, perturb};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnomalySpec {
    pub diff_order: usize,
    pub trailing_window: usize,
    pub beta: f64,
    pub delay: usize,
    /// Scoring window length; the checkpoint's training window when unset.
    pub input_len: Option<usize>,
}

impl Default for AnomalySpec {
    fn default() -> Self {
        AnomalySpec {
            diff_order: 0,
            trailing_window: 100,
            beta: 4.0,
            delay: 7,
            input_len: None,
        }
    }
}

impl AnomalySpec {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.trailing_window >= 2, "trailing_window must be >= 2");
        ensure!(self.beta.is_finite(), "beta must be finite");
        ensure!(self.input_len != Some(0), "input_len must be >= 1");
        Ok(())
    }
}

/// `½(‖z₁ − z₃‖₁ + ‖z₂ − z₃‖₁)` at the last step, where `z₁` masks the last
/// step, `z₂` encodes the perturbed window and `z₃` the raw one. Windows
/// must already be on the checkpoint's normalized scale and share a length.
fn scores_normalized(enc: &FrozenEncoder, windows: &[Series]) -> Result<Vec<f64>> {
    let bank = d4_filters();
    let pcfg = enc.ckpt.train.perturb_config();
    let perturbed = windows
        .iter()
        .map(|w| perturb(w, &pcfg, &bank))
        .collect::<Result<Vec<_>>>()?;
    let z1 = enc.last_step(windows, true)?;
    let z2 = enc.last_step(&perturbed, false)?;
    let z3 = enc.last_step(windows, false)?;
    let l1 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>();
    Ok((0..windows.len())
        .map(|i| 0.5 * (l1(&z1[i], &z3[i]) + l1(&z2[i], &z3[i])))
        .collect())
}

/// Abnormal score of the last step of `window` (raw scale).
pub fn anomaly_score(ckpt: &Checkpoint, window: &Series) -> Result<f64> {
    ensure!(!window.is_empty(), "empty window");
    let enc = FrozenEncoder::new(ckpt);
    let w = enc.normalize(window)?;
    Ok(scores_normalized(&enc, std::slice::from_ref(&w))?[0])
}

/// Turns every true segment into a full detection when any flag falls in
/// `[onset, onset + delay]` (inside the segment), and into a full miss
/// otherwise. Flags outside segments are kept.
pub fn delay_adjust(flags: &[bool], truth: &[bool], delay: usize) -> Vec<bool> {
    let mut out = flags.to_vec();
    let mut t = 0;
    while t < truth.len() {
        if !truth[t] {
            t += 1;
            continue;
        }
        let start = t;
        while t < truth.len() && truth[t] {
            t += 1;
        }
        let end = t;
        let hit = flags[start..end.min(start + delay + 1)].iter().any(|&f| f);
        out[start..end].iter_mut().for_each(|v| *v = hit);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Point-wise precision/recall/F1. With no predicted positives precision is
/// 1; with no true positives recall is 1.
pub fn prf(pred: &[bool], truth: &[bool]) -> Prf {
    let tp = pred.iter().zip(truth).filter(|(p, t)| **p && **t).count() as f64;
    let pp = pred.iter().filter(|&&p| p).count() as f64;
    let ap = truth.iter().filter(|&&t| t).count() as f64;
    let precision = if pp == 0.0 { 1.0 } else { tp / pp };
    let recall = if ap == 0.0 { 1.0 } else { tp / ap };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf { precision, recall, f1 }
}

/// Flags step `t` when `scores[t] > μ + β·σ` of the `window` scores before it;
/// steps without a score or without a full trailing window are not flagged.
pub fn threshold_flags(scores: &[Option<f64>], window: usize, beta: f64) -> Vec<bool> {
    (0..scores.len())
        .map(|t| {
            let Some(s) = scores[t] else { return false };
            if t < window {
                return false;
            }
            let prev: Option<Vec<f64>> = scores[t - window..t].iter().copied().collect();
            let Some(prev) = prev else { return false };
            let n = prev.len() as f64;
            let mu = prev.iter().sum::<f64>() / n;
            let sd = (prev.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n).sqrt();
            s > mu + beta * sd
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    #[serde(flatten)]
    pub metrics: Prf,
    pub pointwise: Prf,
    pub n_flags: usize,
    pub n_scored: usize,
    pub input_len: usize,
    /// Score per step of the differenced series (`None` before the first
    /// full window).
    #[serde(skip)]
    pub scores: Vec<Option<f64>>,
    #[serde(skip)]
    pub flags: Vec<bool>,
}

/// Streaming evaluation: difference, normalize, score every step that ends a
/// full window, threshold against trailing scores, delay-adjust and score.
/// Labels of the first `diff_order` steps are dropped with them.
pub fn anomaly_stream_eval(
    ckpt: &Checkpoint,
    series: &Series,
    truth: &[bool],
    spec: &AnomalySpec,
) -> Result<AnomalyReport> {
    spec.validate()?;
    ensure!(
        truth.len() == series.len(),
        "{} labels for a series of length {}",
        truth.len(),
        series.len()
    );
    let diffed = difference(series, spec.diff_order)?;
    let truth = &truth[spec.diff_order..];
    let enc = FrozenEncoder::new(ckpt);
    let s = enc.normalize(&diffed)?;
    let input_len = spec.input_len.unwrap_or(ckpt.train.window_len).min(s.len());
    let windows: Vec<Series> = (input_len - 1..s.len())
        .map(|t| s.slice(t + 1 - input_len, t + 1))
        .collect();
    let scored = scores_normalized(&enc, &windows)?;
    let mut scores = vec![None; input_len - 1];
    scores.extend(scored.into_iter().map(Some));
    let flags = threshold_flags(&scores, spec.trailing_window, spec.beta);
    let adjusted = delay_adjust(&flags, truth, spec.delay);
    Ok(AnomalyReport {
        metrics: prf(&adjusted, truth),
        pointwise: prf(&flags, truth),
        n_flags: flags.iter().filter(|&&f| f).count(),
        n_scored: windows.len(),
        input_len,
        scores,
        flags,
    })
}
