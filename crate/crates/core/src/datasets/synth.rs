use std::f64::consts::TAU;
use std::ops::Range;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{LabeledDataset, LabeledSplit};
use crate::error::{ensure, Result};
use crate::rng::{stream_rng, Stream};
use crate::series::Series;

/// Sine with sinusoidal high-frequency noise on the two end thirds and a
/// rising level shift on the middle third. Frequencies are in cycles per
/// sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyConfig {
    pub len: usize,
    pub period: f64,
    pub noise_freq1: f64,
    pub noise_amp1: f64,
    pub noise_freq2: f64,
    pub noise_amp2: f64,
    /// Level shift reached at the end of the middle third.
    pub ramp: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            len: 900,
            period: 300.0,
            noise_freq1: 0.2,
            noise_amp1: 0.3,
            noise_freq2: 0.35,
            noise_amp2: 0.3,
            ramp: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Toy {
    pub series: Series,
    /// First, middle and last thirds; they partition `0..len`.
    pub regions: [Range<usize>; 3],
}

/// Phases of the sine and of both noise tones come from the generator stream.
pub fn synth_toy(cfg: &ToyConfig, seed: u64) -> Result<Toy> {
    ensure!(cfg.len >= 3, "toy length must be >= 3");
    ensure!(cfg.period > 0.0, "period must be positive");
    let mut rng = stream_rng(seed, Stream::Generator);
    let phase: f64 = rng.random_range(0.0..TAU);
    let p1: f64 = rng.random_range(0.0..TAU);
    let p2: f64 = rng.random_range(0.0..TAU);
    let (a, b) = (cfg.len / 3, 2 * cfg.len / 3);
    let mid = (b - a).max(1) as f64;
    let values = (0..cfg.len)
        .map(|t| {
            let tf = t as f64;
            let base = (TAU * tf / cfg.period + phase).sin();
            base + if t < a {
                cfg.noise_amp1 * (TAU * cfg.noise_freq1 * tf + p1).sin()
            } else if t < b {
                cfg.ramp * (t - a + 1) as f64 / mid
            } else {
                cfg.noise_amp2 * (TAU * cfg.noise_freq2 * tf + p2).sin()
            }
        })
        .collect();
    Ok(Toy {
        series: Series::univariate(values),
        regions: [0..a, a..b, b..cfg.len],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassShape {
    Sine,
    Square,
    Sawtooth,
}

impl ClassShape {
    pub const ALL: [ClassShape; 3] = [ClassShape::Sine, ClassShape::Square, ClassShape::Sawtooth];

    /// Unit-amplitude waveform at phase `x` (in cycles).
    pub fn eval(self, x: f64) -> f64 {
        let f = x.rem_euclid(1.0);
        match self {
            ClassShape::Sine => (TAU * f).sin(),
            ClassShape::Square => {
                if f < 0.5 {
                    1.0
                } else {
                    -1.0
                }
            }
            ClassShape::Sawtooth => 2.0 * f - 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassesConfig {
    /// Series per class in each of train and test.
    pub per_class: usize,
    pub len: usize,
    pub sigma: f64,
    pub period: f64,
}

impl Default for ClassesConfig {
    fn default() -> Self {
        ClassesConfig {
            per_class: 40,
            len: 128,
            sigma: 0.3,
            period: 32.0,
        }
    }
}

/// Sine, square and sawtooth waves (labels 0, 1, 2) with uniform random
/// phase and Gaussian noise; classes interleave within each split.
pub fn synth_classes(cfg: &ClassesConfig, seed: u64) -> Result<LabeledDataset> {
    ensure!(cfg.per_class >= 1, "per_class must be >= 1");
    ensure!(cfg.len >= 1, "length must be >= 1");
    ensure!(cfg.sigma >= 0.0 && cfg.sigma.is_finite(), "sigma must be >= 0");
    ensure!(cfg.period > 0.0, "period must be positive");
    let mut rng = stream_rng(seed, Stream::Generator);
    let noise = Normal::new(0.0, cfg.sigma).map_err(|e| crate::error::Error::invalid(e.to_string()))?;
    let mut split = || {
        let mut out = LabeledSplit::default();
        for _ in 0..cfg.per_class {
            for (label, shape) in ClassShape::ALL.iter().enumerate() {
                let phase: f64 = rng.random_range(0.0..1.0);
                let values = (0..cfg.len)
                    .map(|t| shape.eval(t as f64 / cfg.period + phase) + noise.sample(&mut rng))
                    .collect();
                out.series.push(Series::univariate(values));
                out.labels.push(label);
            }
        }
        out
    };
    let train = split();
    let test = split();
    Ok(LabeledDataset {
        train,
        test,
        n_classes: 3,
        class_names: vec!["0".into(), "1".into(), "2".into()],
    })
}
