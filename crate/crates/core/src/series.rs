use crate::error::{ensure, Result};

/// A length-M, N-feature real-valued sequence stored row-major (time-major).
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    data: Vec<f64>,
    n_features: usize,
}

impl Series {
    pub fn new(data: Vec<f64>, n_features: usize) -> Result<Self> {
        ensure!(n_features >= 1, "series needs at least one feature");
        ensure!(
            data.len().is_multiple_of(n_features),
            "{} values do not divide into {} features",
            data.len(),
            n_features
        );
        Ok(Series { data, n_features })
    }

    pub fn univariate(values: Vec<f64>) -> Self {
        Series {
            data: values,
            n_features: 1,
        }
    }

    /// Builds a series from per-feature columns of equal length.
    pub fn from_channels(channels: &[Vec<f64>]) -> Result<Self> {
        ensure!(!channels.is_empty(), "series needs at least one channel");
        let len = channels[0].len();
        ensure!(channels.iter().all(|c| c.len() == len), "channels have unequal lengths");
        let n = channels.len();
        let mut data = Vec::with_capacity(len * n);
        for t in 0..len {
            for c in channels {
                data.push(c[t]);
            }
        }
        Ok(Series { data, n_features: n })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.n_features
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_features..(t + 1) * self.n_features]
    }

    pub fn get(&self, t: usize, c: usize) -> f64 {
        self.data[t * self.n_features + c]
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(self.n_features).copied().collect()
    }

    pub fn channels(&self) -> Vec<Vec<f64>> {
        (0..self.n_features).map(|c| self.channel(c)).collect()
    }

    /// Rows `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Series {
        Series {
            data: self.data[start * self.n_features..end * self.n_features].to_vec(),
            n_features: self.n_features,
        }
    }
}
