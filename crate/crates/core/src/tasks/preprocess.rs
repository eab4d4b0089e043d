//! Z-scoring and differencing.

use crate::error::{ensure, Result};
use crate::series::Series;
use crate::trainer::Normalization;

/// `(x − mean) / std` per feature; features with zero spread are only centered.
pub fn zscore(s: &Series, stats: &Normalization) -> Result<Series> {
    let n = s.n_features();
    ensure!(
        stats.mean.len() == n && stats.std.len() == n,
        "statistics cover {} features, series has {n}",
        stats.mean.len()
    );
    let data = s
        .data()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let c = v - stats.mean[i % n];
            let sd = stats.std[i % n];
            if sd > 0.0 {
                c / sd
            } else {
                c
            }
        })
        .collect();
    Series::new(data, n)
}

/// `d`-fold first difference; the result is `d` steps shorter.
pub fn difference(s: &Series, d: usize) -> Result<Series> {
    ensure!(
        d < s.len(),
        "difference order {d} needs a series longer than {}",
        s.len()
    );
    let n = s.n_features();
    let mut data = s.data().to_vec();
    let mut len = s.len();
    for _ in 0..d {
        data = (n..len * n).map(|i| data[i] - data[i - n]).collect();
        len -= 1;
    }
    Series::new(data, n)
}
