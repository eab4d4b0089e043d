//! Closed-form ridge regression with a centered intercept.

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Ridge {
    /// `H×D`.
    pub weights: DMatrix<f64>,
    /// `D`.
    pub intercept: DVector<f64>,
    pub penalty: f64,
}

impl Ridge {
    pub fn predict(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = z * &self.weights;
        for mut row in out.row_iter_mut() {
            row += self.intercept.transpose();
        }
        out
    }
}

pub(crate) fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.mean()))
}

pub(crate) fn center(m: &DMatrix<f64>, means: &DVector<f64>) -> DMatrix<f64> {
    let mut c = m.clone();
    for mut row in c.row_iter_mut() {
        row -= means.transpose();
    }
    c
}

/// `W = (ZᶜᵀZᶜ + λI)⁻¹ ZᶜᵀYᶜ` by Cholesky; intercept `ȳ − z̄ᵀW`.
pub fn ridge_fit(z: &DMatrix<f64>, y: &DMatrix<f64>, penalty: f64) -> Result<Ridge> {
    ensure!(z.nrows() >= 1, "ridge needs at least one sample");
    ensure!(
        z.nrows() == y.nrows(),
        "ridge inputs have {} and {} rows",
        z.nrows(),
        y.nrows()
    );
    ensure!(
        penalty > 0.0 && penalty.is_finite(),
        "ridge penalty must be > 0, got {penalty}"
    );
    ensure!(
        z.iter().chain(y.iter()).all(|v| v.is_finite()),
        "ridge inputs contain non-finite values"
    );
    let zm = column_means(z);
    let ym = column_means(y);
    let zc = center(z, &zm);
    let yc = center(y, &ym);
    let mut gram = zc.transpose() * &zc;
    for i in 0..gram.nrows() {
        gram[(i, i)] += penalty;
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::NumericFailure("ridge system is not positive definite".into()))?;
    let weights = chol.solve(&(zc.transpose() * &yc));
    let intercept = ym - weights.transpose() * zm;
    Ok(Ridge {
        weights,
        intercept,
        penalty,
    })
}
