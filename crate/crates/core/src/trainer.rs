//! Self-supervised training: windows are cut from the normalized dataset,
//! low-pass perturbed, cropped into two overlapping views, encoded and
//! scored by the hierarchical triplet loss; parameters follow Adam.
//!
//! Adam update for every parameter `θ` with gradient `g` at step `t ≥ 1`:
//! `m ← β₁m + (1−β₁)g`, `v ← β₂v + (1−β₂)g²`,
//! `θ ← θ − lr·(m/(1−β₁ᵗ)) / (sqrt(v/(1−β₂ᵗ)) + ε)`
//! with `β₁ = 0.9`, `β₂ = 0.999`, `ε = 1e−8`.

use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::arraygrad::{NdArray, Scalar, Tape, Var};
use crate::checkpoint::Checkpoint;
use crate::encoder::{encode_graph, init_params, series_batch, EncoderConfig, EncoderParams};
use crate::error::{ensure, Error, Result};
use crate::loss::{hierarchical_graph, LossConfig, LossTerms};
use crate::rng::{stream_rng, Rng, Stream};
use crate::sampler::{make_views, sample_crop_pair};
use crate::series::Series;
use crate::wavelet::{d4_filters, perturb, FilterBank, Levels, PerturbConfig};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub iters: usize,
    pub seed: u64,
    /// Length of the random training windows; clipped to the shortest series.
    pub window_len: usize,
    pub min_overlap: usize,
    pub alpha_thresh: f64,
    pub epsilon: f64,
    pub zeta: f64,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let loss = LossConfig::default();
        TrainConfig {
            lr: 1e-3,
            batch_size: 8,
            iters: 600,
            seed: 0,
            window_len: 256,
            min_overlap: 8,
            alpha_thresh: 0.2,
            epsilon: loss.epsilon,
            zeta: loss.zeta,
            precision: Precision::F32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.lr > 0.0 && self.lr.is_finite(), "lr must be > 0, got {}", self.lr);
        ensure!(self.iters >= 1, "iters must be >= 1");
        ensure!(self.batch_size >= 1, "batch_size must be >= 1");
        ensure!(
            self.min_overlap >= 2,
            "min_overlap must be >= 2, got {}",
            self.min_overlap
        );
        ensure!(
            self.window_len >= self.min_overlap,
            "window_len {} is shorter than min_overlap {}",
            self.window_len,
            self.min_overlap
        );
        ensure!(
            (0.0..1.0).contains(&self.alpha_thresh),
            "alpha_thresh must lie in [0, 1), got {}",
            self.alpha_thresh
        );
        self.loss_config().validate()
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            epsilon: self.epsilon,
            zeta: self.zeta,
            symmetric: false,
        }
    }

    pub fn perturb_config(&self) -> PerturbConfig {
        PerturbConfig {
            alpha: self.alpha_thresh,
            levels: Levels::Auto,
        }
    }
}

/// Per-feature z-score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    /// Pools every timestep of every series. Constant features get unit scale.
    pub fn fit(series: &[Series]) -> Result<Self> {
        ensure!(!series.is_empty(), "cannot fit normalization on no data");
        let n = series[0].n_features();
        ensure!(
            series.iter().all(|s| s.n_features() == n),
            "series differ in feature count"
        );
        let mut count = 0usize;
        let mut mean = vec![0.0; n];
        for s in series {
            for t in 0..s.len() {
                for (m, v) in mean.iter_mut().zip(s.row(t)) {
                    *m += v;
                }
            }
            count += s.len();
        }
        ensure!(count > 0, "cannot fit normalization on empty series");
        mean.iter_mut().for_each(|m| *m /= count as f64);
        let mut var = vec![0.0; n];
        for s in series {
            for t in 0..s.len() {
                for ((acc, v), m) in var.iter_mut().zip(s.row(t)).zip(&mean) {
                    *acc += (v - m).powi(2);
                }
            }
        }
        let std = var
            .iter()
            .map(|v| {
                let sd = (v / count as f64).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Normalization { mean, std })
    }

    pub fn identity(n_features: usize) -> Self {
        Normalization {
            mean: vec![0.0; n_features],
            std: vec![1.0; n_features],
        }
    }

    pub fn apply(&self, s: &Series) -> Result<Series> {
        ensure!(
            s.n_features() == self.mean.len(),
            "normalization fitted for {} features, series has {}",
            self.mean.len(),
            s.n_features()
        );
        let n = self.mean.len();
        let data = s
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| (v - self.mean[i % n]) / self.std[i % n])
            .collect();
        Series::new(data, n)
    }
}

/// Loss of one optimization step with its per-level breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub loss: f64,
    pub levels: Vec<LossTerms>,
}

/// Training state at a fixed precision.
pub struct Trainer<F: Scalar> {
    encoder: EncoderConfig,
    cfg: TrainConfig,
    data: Vec<Series>,
    window: usize,
    normalization: Normalization,
    params: EncoderParams<F>,
    m: Vec<NdArray<F>>,
    v: Vec<NdArray<F>>,
    steps: usize,
    rng: Rng,
    bank: FilterBank,
    last: Option<StepReport>,
}

impl<F: Scalar> Trainer<F> {
    pub fn new(dataset: &[Series], encoder: &EncoderConfig, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        encoder.validate()?;
        ensure!(!dataset.is_empty(), "training dataset is empty");
        let mut kept = Vec::new();
        for (i, s) in dataset.iter().enumerate() {
            ensure!(
                s.n_features() == encoder.n_features,
                "series {i} has {} features, encoder expects {}",
                s.n_features(),
                encoder.n_features
            );
            if s.len() < cfg.min_overlap {
                log::warn!(
                    "skipping series {i}: length {} is shorter than min_overlap {}",
                    s.len(),
                    cfg.min_overlap
                );
            } else {
                kept.push(s.clone());
            }
        }
        ensure!(
            !kept.is_empty(),
            "no series is at least min_overlap = {} long",
            cfg.min_overlap
        );
        let normalization = Normalization::fit(&kept)?;
        let data = kept
            .iter()
            .map(|s| normalization.apply(s))
            .collect::<Result<Vec<_>>>()?;
        let shortest = data.iter().map(Series::len).min().unwrap();
        let window = cfg.window_len.min(shortest);
        if window < cfg.window_len {
            log::info!("window length clipped to {window} by the shortest series");
        }
        let params = init_params::<F>(encoder, cfg.seed)?;
        let zeros: Vec<NdArray<F>> = params.values().iter().map(|p| NdArray::zeros(p.shape())).collect();
        Ok(Trainer {
            encoder: encoder.clone(),
            cfg: cfg.clone(),
            data,
            window,
            normalization,
            params,
            m: zeros.clone(),
            v: zeros,
            steps: 0,
            rng: stream_rng(cfg.seed, Stream::Sampler),
            bank: d4_filters(),
            last: None,
        })
    }

    pub fn params(&self) -> &EncoderParams<F> {
        &self.params
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn window_len(&self) -> usize {
        self.window
    }

    pub fn normalization(&self) -> &Normalization {
        &self.normalization
    }

    /// Raw windows for one batch plus their perturbed copies.
    fn draw_windows(&mut self) -> Result<(Vec<Series>, Vec<Series>)> {
        let pcfg = self.cfg.perturb_config();
        let mut raw = Vec::with_capacity(self.cfg.batch_size);
        let mut pert = Vec::with_capacity(self.cfg.batch_size);
        for _ in 0..self.cfg.batch_size {
            let s = &self.data[self.rng.random_range(0..self.data.len())];
            let start = self.rng.random_range(0..=s.len() - self.window);
            let w = s.slice(start, start + self.window);
            pert.push(perturb(&w, &pcfg, &self.bank)?);
            raw.push(w);
        }
        Ok((raw, pert))
    }

    /// Loss and parameter gradients on a freshly drawn batch.
    pub fn loss_and_gradients(&mut self) -> Result<(StepReport, Vec<NdArray<F>>)> {
        let (raw, pert) = self.draw_windows()?;
        let cp = sample_crop_pair(self.window, self.cfg.min_overlap, &mut self.rng)?;
        let views = raw
            .iter()
            .zip(&pert)
            .map(|(x, xt)| make_views(x, xt, &cp))
            .collect::<Result<Vec<_>>>()?;
        let overlap = views[0].overlap;
        let batch = |pick: fn(&crate::sampler::Views) -> &Series| -> Result<NdArray<F>> {
            let refs: Vec<&Series> = views.iter().map(pick).collect();
            series_batch(&refs)
        };
        let inputs = [
            (batch(|v| &v.x_p)?, overlap.offset_p),
            (batch(|v| &v.x_q)?, overlap.offset_q),
            (batch(|v| &v.x_tilde_p)?, overlap.offset_p),
            (batch(|v| &v.x_tilde_q)?, overlap.offset_q),
        ];

        let mut tape = Tape::new();
        let pvars: Vec<Var> = self.params.values().iter().map(|p| tape.leaf(p.clone())).collect();
        let mut z = [pvars[0]; 4];
        for (slot, (x, off)) in z.iter_mut().zip(inputs) {
            let xv = tape.leaf(x);
            let rep = encode_graph(&mut tape, &self.encoder, &pvars, xv, None)?;
            *slot = tape.slice_time(rep, off, overlap.len)?;
        }
        let h = hierarchical_graph(&mut tape, z, &self.cfg.loss_config())?;
        let loss = tape.value(h.loss).item()?.as_f64();
        let mut grads = tape.backward(h.loss)?;
        let g = pvars.iter().map(|&v| grads.take(v)).collect();
        Ok((StepReport { loss, levels: h.levels }, g))
    }

    /// One Adam step. Non-finite values abort with the iteration number and
    /// the last finite loss terms.
    pub fn step(&mut self) -> Result<StepReport> {
        let iteration = self.steps + 1;
        let (report, grads) = match self.loss_and_gradients() {
            Ok(r) => r,
            Err(Error::NumericFailure(msg)) => {
                return Err(Error::NumericFailure(format!(
                    "iteration {iteration}: {msg}; last finite terms: {:?}",
                    self.last.as_ref().map(|r| &r.levels)
                )))
            }
            Err(e) => return Err(e),
        };
        if !report.loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NumericFailure(format!(
                "iteration {iteration}: non-finite loss or gradient; terms: {:?}",
                report.levels
            )));
        }
        self.steps = iteration;
        let t = iteration as i32;
        let b1 = F::from_f64(ADAM_BETA1);
        let b2 = F::from_f64(ADAM_BETA2);
        let c1 = F::from_f64(1.0 - ADAM_BETA1.powi(t));
        let c2 = F::from_f64(1.0 - ADAM_BETA2.powi(t));
        let lr = F::from_f64(self.cfg.lr);
        let eps = F::from_f64(ADAM_EPS);
        let one = F::one();
        for (((p, m), v), g) in self
            .params
            .values_mut()
            .iter_mut()
            .zip(&mut self.m)
            .zip(&mut self.v)
            .zip(&grads)
        {
            for (((pv, mv), vv), &gv) in p
                .data_mut()
                .iter_mut()
                .zip(m.data_mut())
                .zip(v.data_mut())
                .zip(g.data())
            {
                *mv = b1 * *mv + (one - b1) * gv;
                *vv = b2 * *vv + (one - b2) * gv * gv;
                *pv = *pv - lr * (*mv / c1) / ((*vv / c2).sqrt() + eps);
            }
        }
        self.last = Some(report.clone());
        Ok(report)
    }

    pub fn checkpoint(&self, final_loss: f64) -> Checkpoint {
        Checkpoint {
            encoder: self.encoder.clone(),
            train: self.cfg.clone(),
            iteration: self.steps,
            final_loss,
            normalization: self.normalization.clone(),
            params: self.params.cast(),
        }
    }
}

/// Trained checkpoint with the per-iteration loss.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub checkpoint: Checkpoint,
    pub trace: Vec<f64>,
}

pub fn train(dataset: &[Series], encoder: &EncoderConfig, cfg: &TrainConfig) -> Result<TrainOutput> {
    match cfg.precision {
        Precision::F32 => train_at::<f32>(dataset, encoder, cfg),
        Precision::F64 => train_at::<f64>(dataset, encoder, cfg),
    }
}

fn train_at<F: Scalar>(dataset: &[Series], encoder: &EncoderConfig, cfg: &TrainConfig) -> Result<TrainOutput> {
    let mut trainer = Trainer::<F>::new(dataset, encoder, cfg)?;
    let mut trace = Vec::with_capacity(cfg.iters);
    for _ in 0..cfg.iters {
        let report = trainer.step()?;
        if trainer.steps() % 50 == 0 {
            log::info!("iteration {}: loss {:.5}", trainer.steps(), report.loss);
        }
        trace.push(report.loss);
    }
    let final_loss = *trace.last().expect("iters >= 1");
    Ok(TrainOutput {
        checkpoint: trainer.checkpoint(final_loss),
        trace,
    })
}

/// Writes `iteration,loss` rows, iterations counted from 1.
pub fn write_loss_trace(path: &Path, trace: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["iteration", "loss"]).map_err(|e| csv_error(path, e))?;
    for (i, l) in trace.iter().enumerate() {
        w.write_record([(i + 1).to_string(), l.to_string()])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::InvalidArgument(format!("{}: {other:?}", path.display())),
    }
}
