//! Inception-style dilated convolution encoder.
//!
//! An affine projection lifts each timestep into the hidden space, then a
//! stack of Inception blocks runs. Block `i` holds one Basic unit per base
//! kernel `k`: two same-padded convolutions with dilation `(2k−1)^(i−1)`
//! around a LeakyReLU, plus (from block 2 on) a pointwise-conv skip from the
//! same unit of the previous block. A max-pool branch and a pointwise
//! aggregator over the concatenated branches complete the block. Every
//! convolution preserves the time length, so the output has one embedding per
//! input timestep.

mod params;

use serde::{Deserialize, Serialize};

use crate::arraygrad::{NdArray, PoolPadding, Scalar, Tape, Var};
use crate::error::{ensure, Error, Result};
use crate::series::Series;

pub use params::{init_params, param_count, param_specs, EncoderParams, ParamSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderConfig {
    pub n_features: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub n_blocks: usize,
    pub base_kernels: Vec<usize>,
    pub leaky_slope: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            n_features: 1,
            hidden_dim: 64,
            output_dim: 320,
            n_blocks: 3,
            base_kernels: vec![2, 5, 8],
            leaky_slope: 0.01,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.n_features >= 1, "n_features must be >= 1");
        ensure!(self.hidden_dim >= 1, "hidden_dim must be >= 1");
        ensure!(self.output_dim >= 1, "output_dim must be >= 1");
        ensure!(self.n_blocks >= 1, "n_blocks must be >= 1");
        ensure!(!self.base_kernels.is_empty(), "base_kernels must not be empty");
        ensure!(
            self.base_kernels.iter().all(|&k| k >= 2),
            "every base kernel must be >= 2, got {:?}",
            self.base_kernels
        );
        ensure!(
            self.leaky_slope > 0.0 && self.leaky_slope < 1.0,
            "leaky_slope must lie in (0, 1), got {}",
            self.leaky_slope
        );
        Ok(())
    }

    pub fn max_kernel(&self) -> usize {
        self.base_kernels.iter().copied().max().unwrap_or(2)
    }

    /// Receptive field of the widest unit after the last block.
    pub fn max_receptive_field(&self) -> u128 {
        receptive_field_of(self.max_kernel(), self.n_blocks)
    }
}

/// Dilation of a unit with base kernel `k` in block `i` (1-indexed):
/// `(2k−1)^(i−1)`.
pub fn dilation_of(kernel: usize, block: usize) -> usize {
    assert!(kernel >= 2 && block >= 1, "kernel >= 2 and block >= 1 required");
    (2 * kernel - 1).saturating_pow(block as u32 - 1)
}

/// Receptive field `(2k−1)^i` of that unit's output. Each block adds
/// `2·d·(k−1)` to the previous field.
pub fn receptive_field_of(kernel: usize, block: usize) -> u128 {
    assert!(kernel >= 2, "kernel >= 2 required");
    ((2 * kernel - 1) as u128).saturating_pow(block as u32)
}

/// Per-timestep embeddings, `B×T×H`.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation<F> {
    pub values: NdArray<F>,
    /// Row `b·T + t` set when that timestep was masked on input.
    pub mask: Option<Vec<bool>>,
}

impl<F: Scalar> Representation<F> {
    pub fn batch(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn len(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.values.shape()[2]
    }

    /// Embedding of timestep `t` of batch item `b`.
    pub fn at(&self, b: usize, t: usize) -> &[F] {
        let (tl, h) = (self.len(), self.dim());
        &self.values.data()[(b * tl + t) * h..(b * tl + t + 1) * h]
    }
}

fn at_block(err: Error, block: usize) -> Error {
    match err {
        Error::NumericFailure(msg) => Error::NumericFailure(format!("block {block}: {msg}")),
        other => other,
    }
}

/// Records the encoder forward pass for `x` (`B×T×N`) on `tape` and returns
/// the `B×T×H` output. `params` must be the tape leaves of the encoder
/// parameters in [`param_specs`] order.
pub fn encode_graph<F: Scalar>(
    tape: &mut Tape<F>,
    cfg: &EncoderConfig,
    params: &[Var],
    x: Var,
    mask: Option<&[bool]>,
) -> Result<Var> {
    let expected = param_specs(cfg).len();
    ensure!(
        params.len() == expected,
        "encoder expects {expected} parameter tensors, got {}",
        params.len()
    );
    let (_, _, n) = tape.value(x).dims3("encoder input")?;
    ensure!(
        n == cfg.n_features,
        "encoder configured for {} features, input has {n}",
        cfg.n_features
    );
    let mut next = params.iter().copied();
    let mut take = || next.next().expect("parameter count checked");
    let slope = cfg.leaky_slope;

    let mut h = tape.linear(x, take(), take()).map_err(|e| at_block(e, 0))?;
    if let Some(m) = mask {
        h = tape.mask_time(h, m)?;
    }
    let mut h = tape.transpose_last(h)?;

    let mut prev_units: Vec<Var> = Vec::new();
    for block in 1..=cfg.n_blocks {
        let step = |tape: &mut Tape<F>, take: &mut dyn FnMut() -> Var| -> Result<(Var, Vec<Var>)> {
            let mut units = Vec::with_capacity(cfg.base_kernels.len());
            for (u, &k) in cfg.base_kernels.iter().enumerate() {
                let d = dilation_of(k, block);
                let (w1, b1, w2, b2) = (take(), take(), take(), take());
                let a = tape.conv1d(h, w1, b1, d)?;
                let a = tape.leaky_relu(a, slope)?;
                let mut out = tape.conv1d(a, w2, b2, d)?;
                if block >= 2 {
                    let (ws, bs) = (take(), take());
                    let s = tape.conv1d(prev_units[u], ws, bs, 1)?;
                    let s = tape.leaky_relu(s, slope)?;
                    out = tape.add(out, s)?;
                }
                units.push(out);
            }
            let (wp, bp) = (take(), take());
            let pooled = tape.maxpool1d(h, 3, 1, PoolPadding::Same)?;
            let m = tape.conv1d(pooled, wp, bp, 1)?;
            let m = tape.leaky_relu(m, slope)?;
            let mut branches = units.clone();
            branches.push(m);
            let cat = tape.concat_channels(&branches)?;
            let (wa, ba) = (take(), take());
            let out = tape.conv1d(cat, wa, ba, 1)?;
            Ok((out, units))
        };
        let (out, units) = step(tape, &mut take).map_err(|e| at_block(e, block))?;
        h = out;
        prev_units = units;
    }
    tape.transpose_last(h)
}

/// Encodes a `B×T×N` batch. `mask`, when given, has one entry per `(b, t)`.
pub fn encode<F: Scalar>(
    params: &EncoderParams<F>,
    cfg: &EncoderConfig,
    x: &NdArray<F>,
    mask: Option<&[bool]>,
) -> Result<Representation<F>> {
    params.check_config(cfg)?;
    let (b, t, _) = x.dims3("encoder input")?;
    if let Some(m) = mask {
        ensure!(m.len() == b * t, "mask has {} entries for a {b}×{t} batch", m.len());
    }
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.values().iter().map(|p| tape.leaf(p.clone())).collect();
    let xv = tape.leaf(x.clone());
    let out = encode_graph(&mut tape, cfg, &vars, xv, mask)?;
    Ok(Representation {
        values: tape.value(out).clone(),
        mask: mask.map(|m| m.to_vec()),
    })
}

/// Stacks equal-length series into a `B×T×N` array.
pub fn series_batch<F: Scalar>(series: &[&Series]) -> Result<NdArray<F>> {
    ensure!(!series.is_empty(), "empty batch");
    let (t, n) = (series[0].len(), series[0].n_features());
    ensure!(t >= 1, "series must have at least one timestep");
    let mut data = Vec::with_capacity(series.len() * t * n);
    for s in series {
        ensure!(
            s.len() == t && s.n_features() == n,
            "batch series differ in shape: {}×{} vs {}×{}",
            s.len(),
            s.n_features(),
            t,
            n
        );
        data.extend(s.data().iter().map(|&v| F::from_f64(v)));
    }
    NdArray::new(vec![series.len(), t, n], data)
}
