//! Contrastive objectives over aligned `B×T×H` representations: temporal and
//! instance contrast, their sum (the contextual loss), the triplet
//! combination of five such losses and its hierarchical application over
//! successively max-pooled time resolutions.

use serde::{Deserialize, Serialize};

use crate::arraygrad::{NdArray, PoolPadding, Scalar, Tape, Var};
use crate::error::{ensure, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    /// Weight of the positive-couplet mean; `(1 − ε)` goes to the hinge.
    pub epsilon: f64,
    /// Triplet margin.
    pub zeta: f64,
    /// Average each contextual loss with its argument-swapped counterpart.
    pub symmetric: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            epsilon: 0.7,
            zeta: 1.0,
            symmetric: false,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            (0.0..=1.0).contains(&self.epsilon),
            "epsilon must lie in [0, 1], got {}",
            self.epsilon
        );
        ensure!(self.zeta >= 0.0, "zeta must be >= 0, got {}", self.zeta);
        Ok(())
    }
}

/// The five contextual losses of one resolution and their triplet value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossTerms {
    pub l_pq: f64,
    pub l_p_pt: f64,
    pub l_q_qt: f64,
    pub l_p_qt: f64,
    pub l_pt_q: f64,
    pub total: f64,
}

/// `ε·(l_pq + l_pp̃ + l_qq̃)/3 + (1−ε)·max(0, 2·l_pq − l_pq̃ − l_p̃q + 2ζ)`.
pub fn triplet_combine(terms: &LossTerms, cfg: &LossConfig) -> f64 {
    let pos = (terms.l_pq + terms.l_p_pt + terms.l_q_qt) / 3.0;
    let hinge = (2.0 * terms.l_pq - terms.l_p_qt - terms.l_pt_q + 2.0 * cfg.zeta).max(0.0);
    cfg.epsilon * pos + (1.0 - cfg.epsilon) * hinge
}

/// Temporal plus instance contrast of `zp` against `zq`, recorded on `tape`.
pub fn contextual_graph<F: Scalar>(tape: &mut Tape<F>, zp: Var, zq: Var, symmetric: bool) -> Result<Var> {
    let temporal = tape.temporal_loss(zp, zq)?;
    let instance = tape.instance_loss(zp, zq)?;
    if !symmetric {
        return tape.lincomb(&[(temporal, 1.0), (instance, 1.0)], 0.0);
    }
    let temporal_rev = tape.temporal_loss(zq, zp)?;
    let instance_rev = tape.instance_loss(zq, zp)?;
    tape.lincomb(
        &[
            (temporal, 0.5),
            (instance, 0.5),
            (temporal_rev, 0.5),
            (instance_rev, 0.5),
        ],
        0.0,
    )
}

/// Output of [`hierarchical_graph`].
#[derive(Debug, Clone)]
pub struct HierarchicalLoss {
    pub loss: Var,
    /// Number of resolutions evaluated (loop iterations).
    pub depth: usize,
    /// Per-resolution terms, finest first.
    pub levels: Vec<LossTerms>,
}

impl HierarchicalLoss {
    /// True when the input had a single timestep and no level was evaluated.
    pub fn is_degenerate(&self) -> bool {
        self.depth == 0
    }
}

/// Records the hierarchical triplet loss over the four aligned overlap
/// representations. While the time axis is longer than one step, the five
/// contextual losses are combined by [`triplet_combine`] and accumulated,
/// then every tensor is max-pooled with kernel 2 / stride 2 (a trailing lone
/// step passes through). The sum is divided by the number of iterations.
pub fn hierarchical_graph<F: Scalar>(
    tape: &mut Tape<F>,
    views: [Var; 4],
    cfg: &LossConfig,
) -> Result<HierarchicalLoss> {
    cfg.validate()?;
    let [mut zp, mut zq, mut ztp, mut ztq] = views;
    let shape = tape.value(zp).shape().to_vec();
    tape.value(zp).dims3("hierarchical loss input")?;
    for v in [zq, ztp, ztq] {
        ensure!(
            tape.value(v).shape() == shape.as_slice(),
            "hierarchical loss inputs differ in shape: {:?} vs {:?}",
            shape,
            tape.value(v).shape()
        );
    }
    let sym = cfg.symmetric;
    let eps = cfg.epsilon;
    let mut level_vars = Vec::new();
    let mut levels = Vec::new();
    while tape.value(zp).shape()[1] > 1 {
        let pq = contextual_graph(tape, zp, zq, sym)?;
        let p_pt = contextual_graph(tape, zp, ztp, sym)?;
        let q_qt = contextual_graph(tape, zq, ztq, sym)?;
        let p_qt = contextual_graph(tape, zp, ztq, sym)?;
        let pt_q = contextual_graph(tape, ztp, zq, sym)?;
        let pos = tape.lincomb(&[(pq, eps / 3.0), (p_pt, eps / 3.0), (q_qt, eps / 3.0)], 0.0)?;
        let gap = tape.lincomb(&[(pq, 2.0), (p_qt, -1.0), (pt_q, -1.0)], 2.0 * cfg.zeta)?;
        let hinge = tape.relu(gap)?;
        let level = tape.lincomb(&[(pos, 1.0), (hinge, 1.0 - eps)], 0.0)?;

        let scalar = |v: Var| tape.value(v).data()[0].as_f64();
        levels.push(LossTerms {
            l_pq: scalar(pq),
            l_p_pt: scalar(p_pt),
            l_q_qt: scalar(q_qt),
            l_p_qt: scalar(p_qt),
            l_pt_q: scalar(pt_q),
            total: scalar(level),
        });
        level_vars.push(level);

        zp = tape.maxpool_time(zp, 2, 2, PoolPadding::Ceil)?;
        zq = tape.maxpool_time(zq, 2, 2, PoolPadding::Ceil)?;
        ztp = tape.maxpool_time(ztp, 2, 2, PoolPadding::Ceil)?;
        ztq = tape.maxpool_time(ztq, 2, 2, PoolPadding::Ceil)?;
    }
    let depth = level_vars.len();
    let loss = if depth == 0 {
        log::warn!("hierarchical loss on a single timestep: no level evaluated, returning 0");
        tape.leaf(NdArray::scalar(F::zero()))
    } else {
        let w = 1.0 / depth as f64;
        let terms: Vec<(Var, f64)> = level_vars.iter().map(|&v| (v, w)).collect();
        tape.lincomb(&terms, 0.0)?
    };
    Ok(HierarchicalLoss { loss, depth, levels })
}

fn eval2<F: Scalar>(
    zp: &NdArray<F>,
    zq: &NdArray<F>,
    f: impl FnOnce(&mut Tape<F>, Var, Var) -> Result<Var>,
) -> Result<f64> {
    let mut tape = Tape::new();
    let p = tape.leaf(zp.clone());
    let q = tape.leaf(zq.clone());
    let out = f(&mut tape, p, q)?;
    Ok(tape.value(out).item()?.as_f64())
}

/// Softmax contrast over timesteps within each instance.
pub fn temporal_loss<F: Scalar>(zp: &NdArray<F>, zq: &NdArray<F>) -> Result<f64> {
    eval2(zp, zq, |t, p, q| t.temporal_loss(p, q))
}

/// Softmax contrast over instances at each timestep.
pub fn instance_loss<F: Scalar>(zp: &NdArray<F>, zq: &NdArray<F>) -> Result<f64> {
    eval2(zp, zq, |t, p, q| t.instance_loss(p, q))
}

pub fn contextual_loss<F: Scalar>(zp: &NdArray<F>, zq: &NdArray<F>) -> Result<f64> {
    eval2(zp, zq, |t, p, q| contextual_graph(t, p, q, false))
}

/// Value, depth and per-level terms of the hierarchical triplet loss.
pub fn hierarchical_triplet<F: Scalar>(
    z_p: &NdArray<F>,
    z_q: &NdArray<F>,
    z_tilde_p: &NdArray<F>,
    z_tilde_q: &NdArray<F>,
    cfg: &LossConfig,
) -> Result<(f64, HierarchicalLoss)> {
    let mut tape = Tape::new();
    let views = [z_p, z_q, z_tilde_p, z_tilde_q].map(|z| tape.leaf(z.clone()));
    let out = hierarchical_graph(&mut tape, views, cfg)?;
    Ok((tape.value(out.loss).item()?.as_f64(), out))
}
