//! Downstream heads and metrics on frozen representations.

pub mod analysis;
pub mod anomaly;
pub mod classify;
pub mod forecast;
pub mod preprocess;
pub mod ridge;

use crate::arraygrad::{NdArray, Scalar};
use crate::checkpoint::Checkpoint;
use crate::encoder::{encode, series_batch, EncoderParams};
use crate::error::{ensure, Result};
use crate::series::Series;

use rayon::prelude::*;

/// Per-dimension max over time of a `B×T×H` array, as `B` rows of `H`.
pub fn pool_segment<F: Scalar>(z: &NdArray<F>) -> Result<Vec<Vec<f64>>> {
    let (b, t, h) = z.dims3("pool_segment input")?;
    ensure!(t >= 1, "pool_segment needs at least one timestep");
    let d = z.data();
    Ok((0..b)
        .map(|bi| {
            (0..h)
                .map(|k| {
                    (0..t)
                        .map(|ti| d[(bi * t + ti) * h + k].as_f64())
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect()
        })
        .collect())
}

/// Frozen encoder from a checkpoint, evaluated in 32-bit.
pub struct FrozenEncoder<'a> {
    pub ckpt: &'a Checkpoint,
    params: &'a EncoderParams<f32>,
}

/// Windows encoded per tape.
const CHUNK: usize = 32;

impl<'a> FrozenEncoder<'a> {
    pub fn new(ckpt: &'a Checkpoint) -> Self {
        FrozenEncoder {
            ckpt,
            params: &ckpt.params,
        }
    }

    /// Encodes equal-length series into one `1×T×H` array each, in input
    /// order. `mask_last` zeroes the final timestep after projection.
    pub fn encode_all(&self, series: &[Series], mask_last: bool) -> Result<Vec<NdArray<f32>>> {
        let chunks: Vec<&[Series]> = series.chunks(CHUNK).collect();
        let out = chunks
            .par_iter()
            .map(|chunk| {
                let refs: Vec<&Series> = chunk.iter().collect();
                let x = series_batch::<f32>(&refs)?;
                let (b, t, _) = x.dims3("batch")?;
                let mask: Option<Vec<bool>> = mask_last.then(|| (0..b * t).map(|i| i % t == t - 1).collect());
                let rep = encode(self.params, &self.ckpt.encoder, &x, mask.as_deref())?;
                let h = rep.dim();
                let data = rep.values.data();
                (0..b)
                    .map(|bi| NdArray::new(vec![1, t, h], data[bi * t * h..(bi + 1) * t * h].to_vec()))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(out.into_iter().flatten().collect())
    }

    /// Representation of the final timestep of each series.
    pub fn last_step(&self, series: &[Series], mask_last: bool) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .encode_all(series, mask_last)?
            .iter()
            .map(|z| {
                let (_, t, h) = z.dims3("rep").expect("rank 3");
                z.data()[(t - 1) * h..].iter().map(|&v| v as f64).collect()
            })
            .collect())
    }

    /// Max-pooled representation of each series.
    pub fn pooled(&self, series: &[Series]) -> Result<Vec<Vec<f64>>> {
        // Unequal lengths are encoded one length group at a time.
        let mut out = vec![Vec::new(); series.len()];
        let mut order: Vec<usize> = (0..series.len()).collect();
        order.sort_by_key(|&i| series[i].len());
        for group in order.chunk_by(|&a, &b| series[a].len() == series[b].len()) {
            let batch: Vec<Series> = group.iter().map(|&i| series[i].clone()).collect();
            for (&i, z) in group.iter().zip(self.encode_all(&batch, false)?) {
                out[i] = pool_segment(&z)?.remove(0);
            }
        }
        Ok(out)
    }

    pub fn normalize(&self, s: &Series) -> Result<Series> {
        self.ckpt.normalization.apply(s)
    }
}
