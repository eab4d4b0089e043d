//! One-vs-rest RBF kernel ridge classifier with a stratified penalty search.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelWidth {
    /// `γ = 1 / median squared pairwise distance` of the training set.
    Median,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifySpec {
    pub rbf_gamma: KernelWidth,
    /// Penalties `C`; the kernel system is regularized by `1/C`.
    pub penalty_grid: Vec<f64>,
}

impl Default for ClassifySpec {
    fn default() -> Self {
        ClassifySpec {
            rbf_gamma: KernelWidth::Median,
            penalty_grid: (-4..=4).map(|i| 10f64.powi(i)).collect(),
        }
    }
}

impl ClassifySpec {
    pub fn validate(&self) -> Result<()> {
        ensure!(!self.penalty_grid.is_empty(), "penalty grid is empty");
        ensure!(
            self.penalty_grid.iter().all(|c| *c > 0.0 && c.is_finite()),
            "penalties must be positive"
        );
        if let KernelWidth::Fixed(g) = self.rbf_gamma {
            ensure!(g > 0.0 && g.is_finite(), "rbf gamma must be positive, got {g}");
        }
        Ok(())
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

pub fn rbf_kernel(a: &[Vec<f64>], b: &[Vec<f64>], gamma: f64) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| (-gamma * sq_dist(&a[i], &b[j])).exp())
}

pub fn median_gamma(x: &[Vec<f64>]) -> f64 {
    let mut d: Vec<f64> = (0..x.len())
        .flat_map(|i| (i + 1..x.len()).map(move |j| (i, j)))
        .map(|(i, j)| sq_dist(&x[i], &x[j]))
        .collect();
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let m = if d.len() % 2 == 1 {
        d[d.len() / 2]
    } else {
        0.5 * (d[d.len() / 2 - 1] + d[d.len() / 2])
    };
    if m > 0.0 {
        1.0 / m
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelClassifier {
    pub support: Vec<Vec<f64>>,
    /// `n×C` dual coefficients.
    pub coef: DMatrix<f64>,
    pub gamma: f64,
    pub penalty: f64,
    pub n_classes: usize,
}

impl KernelClassifier {
    /// Solves `(K + I/C)·A = Y` with `Y[i,c] = ±1` for the one-vs-rest targets.
    pub fn fit(x: &[Vec<f64>], labels: &[usize], n_classes: usize, gamma: f64, penalty: f64) -> Result<Self> {
        ensure!(
            x.len() == labels.len(),
            "{} samples but {} labels",
            x.len(),
            labels.len()
        );
        ensure!(!x.is_empty(), "classifier needs training samples");
        ensure!(labels.iter().all(|&l| l < n_classes), "label out of range");
        let mut k = rbf_kernel(x, x, gamma);
        for i in 0..k.nrows() {
            k[(i, i)] += 1.0 / penalty;
        }
        let y = DMatrix::from_fn(x.len(), n_classes, |i, c| if labels[i] == c { 1.0 } else { -1.0 });
        let chol = k
            .cholesky()
            .ok_or_else(|| Error::NumericFailure("kernel system is not positive definite".into()))?;
        Ok(KernelClassifier {
            support: x.to_vec(),
            coef: chol.solve(&y),
            gamma,
            penalty,
            n_classes,
        })
    }

    /// `m×C` decision values.
    pub fn decision_values(&self, x: &[Vec<f64>]) -> DMatrix<f64> {
        rbf_kernel(x, &self.support, self.gamma) * &self.coef
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Vec<usize> {
        let d = self.decision_values(x);
        d.row_iter()
            .map(|r| {
                // First maximum wins.
                (0..r.len()).fold(0, |best, c| if r[c] > r[best] { c } else { best })
            })
            .collect()
    }

    pub fn accuracy(&self, x: &[Vec<f64>], labels: &[usize]) -> f64 {
        accuracy(&self.predict(x), labels)
    }
}

pub fn accuracy(pred: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    pred.iter().zip(labels).filter(|(a, b)| a == b).count() as f64 / labels.len() as f64
}

/// Fold of every sample: within each class, samples are dealt round-robin
/// over `k` folds in index order.
pub fn stratified_folds(labels: &[usize], n_classes: usize, k: usize) -> Vec<usize> {
    let mut seen = vec![0usize; n_classes];
    labels
        .iter()
        .map(|&l| {
            let f = seen[l] % k;
            seen[l] += 1;
            f
        })
        .collect()
}

/// Penalty search result.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub classifier: KernelClassifier,
    /// `(penalty, validation accuracy)` over the grid.
    pub scores: Vec<(f64, f64)>,
    pub folds: usize,
}

/// Fits the classifier, choosing the penalty by stratified
/// `min(5, smallest class)`-fold accuracy (first best in grid order). With
/// fewer than two samples in some class, accuracy on the training set is
/// used instead.
pub fn rbf_classifier_fit(x: &[Vec<f64>], labels: &[usize], spec: &ClassifySpec) -> Result<Selection> {
    spec.validate()?;
    ensure!(
        x.len() == labels.len(),
        "{} samples but {} labels",
        x.len(),
        labels.len()
    );
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; n_classes];
    labels.iter().for_each(|&l| counts[l] += 1);
    let present = counts.iter().filter(|&&c| c > 0).count();
    ensure!(present >= 2, "classification needs at least two classes, got {present}");
    let gamma = match spec.rbf_gamma {
        KernelWidth::Median => median_gamma(x),
        KernelWidth::Fixed(g) => g,
    };
    let k = counts.iter().copied().filter(|&c| c > 0).min().unwrap().min(5);
    let folds = if k >= 2 {
        stratified_folds(labels, n_classes, k)
    } else {
        Vec::new()
    };
    let mut scores = Vec::with_capacity(spec.penalty_grid.len());
    for &c in &spec.penalty_grid {
        let acc = if k >= 2 {
            let mut correct = 0usize;
            for f in 0..k {
                let split = |keep: bool| -> (Vec<Vec<f64>>, Vec<usize>) {
                    (0..x.len())
                        .filter(|&i| (folds[i] == f) != keep)
                        .map(|i| (x[i].clone(), labels[i]))
                        .unzip()
                };
                let (xt, yt) = split(true);
                let (xv, yv) = split(false);
                let m = KernelClassifier::fit(&xt, &yt, n_classes, gamma, c)?;
                correct += m.predict(&xv).iter().zip(&yv).filter(|(a, b)| a == b).count();
            }
            correct as f64 / x.len() as f64
        } else {
            KernelClassifier::fit(x, labels, n_classes, gamma, c)?.accuracy(x, labels)
        };
        scores.push((c, acc));
    }
    let best = scores.iter().fold(scores[0], |b, &s| if s.1 > b.1 { s } else { b });
    Ok(Selection {
        classifier: KernelClassifier::fit(x, labels, n_classes, gamma, best.0)?,
        scores,
        folds: if k >= 2 { k } else { 1 },
    })
}
