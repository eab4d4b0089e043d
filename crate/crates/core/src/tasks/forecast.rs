//! Ridge forecasting from the representation of the last observed step.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ridge::ridge_fit;
use super::FrozenEncoder;
use crate::checkpoint::Checkpoint;
use crate::error::{ensure, Result};
use crate::series::Series;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForecastSpec {
    pub horizon: usize,
    pub ridge_grid: Vec<f64>,
    /// Encoder input length; the checkpoint's training window when unset.
    pub input_len: Option<usize>,
    pub train_frac: f64,
    pub valid_frac: f64,
}

impl Default for ForecastSpec {
    fn default() -> Self {
        ForecastSpec {
            horizon: 24,
            ridge_grid: vec![
                0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0,
            ],
            input_len: None,
            train_frac: 0.6,
            valid_frac: 0.2,
        }
    }
}

impl ForecastSpec {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.horizon >= 1, "horizon must be >= 1");
        ensure!(!self.ridge_grid.is_empty(), "ridge grid is empty");
        ensure!(
            self.ridge_grid.iter().all(|l| *l > 0.0 && l.is_finite()),
            "ridge penalties must be positive"
        );
        ensure!(self.input_len != Some(0), "input_len must be >= 1");
        ensure!(
            self.train_frac > 0.0 && self.valid_frac > 0.0 && self.train_frac + self.valid_frac < 1.0,
            "split fractions must be positive and leave a test split"
        );
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    pub horizon: usize,
    pub input_len: usize,
    pub penalty: f64,
    /// `(penalty, validation MSE)` over the grid.
    pub validation: Vec<(f64, f64)>,
    pub mse: f64,
    pub mae: f64,
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
}

/// End steps `t` of the supervised pairs in each split: the input ends at
/// `t`, the target covers `t+1..=t+horizon`, and both lie inside the split
/// (inputs may reach back into earlier splits).
fn split_ends(len: usize, input_len: usize, spec: &ForecastSpec) -> Result<[Vec<usize>; 3]> {
    let h = spec.horizon;
    let b1 = (len as f64 * spec.train_frac).floor() as usize;
    let b2 = (len as f64 * (spec.train_frac + spec.valid_frac)).floor() as usize;
    let first = input_len - 1;
    let train: Vec<usize> = (first..).take_while(|t| t + h < b1).collect();
    let valid: Vec<usize> = (first.max(b1)..).take_while(|t| t + h < b2).collect();
    let test: Vec<usize> = (first.max(b2)..).take_while(|t| t + h < len).collect();
    ensure!(
        !train.is_empty() && !valid.is_empty() && !test.is_empty(),
        "series of length {len} is too short for input length {input_len} and horizon {h} \
         (pairs per split: {}, {}, {})",
        train.len(),
        valid.len(),
        test.len()
    );
    Ok([train, valid, test])
}

fn targets(s: &Series, ends: &[usize], horizon: usize) -> DMatrix<f64> {
    let n = s.n_features();
    DMatrix::from_fn(ends.len(), horizon * n, |i, j| s.get(ends[i] + 1 + j / n, j % n))
}

fn rows(features: Vec<Vec<f64>>) -> DMatrix<f64> {
    let d = features.first().map_or(0, Vec::len);
    DMatrix::from_fn(features.len(), d, |i, j| features[i][j])
}

/// Penalty selection on validation MSE, then test metrics.
fn fit_and_score(
    feats: [DMatrix<f64>; 3],
    targ: [DMatrix<f64>; 3],
    spec: &ForecastSpec,
    input_len: usize,
) -> Result<ForecastReport> {
    let mut validation = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    for &lambda in &spec.ridge_grid {
        let model = ridge_fit(&feats[0], &targ[0], lambda)?;
        let mse = (model.predict(&feats[1]) - &targ[1]).map(|v| v * v).mean();
        validation.push((lambda, mse));
        if best.is_none_or(|(_, m)| mse < m) {
            best = Some((lambda, mse));
        }
    }
    let penalty = best.unwrap().0;
    let model = ridge_fit(&feats[0], &targ[0], penalty)?;
    let err = model.predict(&feats[2]) - &targ[2];
    Ok(ForecastReport {
        horizon: spec.horizon,
        input_len,
        penalty,
        validation,
        mse: err.map(|v| v * v).mean(),
        mae: err.map(f64::abs).mean(),
        n_train: feats[0].nrows(),
        n_valid: feats[1].nrows(),
        n_test: feats[2].nrows(),
    })
}

/// Forecasts `horizon` steps of every feature from the encoder's
/// representation of the last input step. Metrics are on the checkpoint's
/// normalized scale.
pub fn forecast_eval(ckpt: &Checkpoint, series: &Series, spec: &ForecastSpec) -> Result<ForecastReport> {
    spec.validate()?;
    let enc = FrozenEncoder::new(ckpt);
    let s = enc.normalize(series)?;
    let input_len = spec.input_len.unwrap_or(ckpt.train.window_len);
    let splits = split_ends(s.len(), input_len, spec)?;
    let mut feats = Vec::new();
    let mut targ = Vec::new();
    for ends in &splits {
        let windows: Vec<Series> = ends.iter().map(|&t| s.slice(t + 1 - input_len, t + 1)).collect();
        feats.push(rows(enc.last_step(&windows, false)?));
        targ.push(targets(&s, ends, spec.horizon));
    }
    fit_and_score(feats.try_into().unwrap(), targ.try_into().unwrap(), spec, input_len)
}

/// The same protocol with the flattened raw input window as features.
/// `series` is used as given (no normalization).
pub fn raw_window_baseline(series: &Series, spec: &ForecastSpec, input_len: usize) -> Result<ForecastReport> {
    spec.validate()?;
    ensure!(input_len >= 1, "input_len must be >= 1");
    let splits = split_ends(series.len(), input_len, spec)?;
    let mut feats = Vec::new();
    let mut targ = Vec::new();
    for ends in &splits {
        let f = ends
            .iter()
            .map(|&t| series.slice(t + 1 - input_len, t + 1).data().to_vec())
            .collect();
        feats.push(rows(f));
        targ.push(targets(series, ends, spec.horizon));
    }
    fit_and_score(feats.try_into().unwrap(), targ.try_into().unwrap(), spec, input_len)
}
