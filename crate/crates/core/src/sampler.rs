//! Overlapping crop pairs and the four encoder views built from them.

use rand::Rng as _;

use crate::error::{ensure, Result};
use crate::rng::Rng;
use crate::series::Series;

/// Two crops `[a1, b1)` and `[a2, b2)` sharing the overlap `[a2, b1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropPair {
    pub a1: usize,
    pub a2: usize,
    pub b1: usize,
    pub b2: usize,
}

impl CropPair {
    pub fn overlap_len(&self) -> usize {
        self.b1 - self.a2
    }

    pub fn first(&self) -> (usize, usize) {
        (self.a1, self.b1)
    }

    pub fn second(&self) -> (usize, usize) {
        (self.a2, self.b2)
    }

    /// Where the overlap starts inside the first and second crop.
    pub fn overlap_offsets(&self) -> (usize, usize) {
        (self.a2 - self.a1, 0)
    }

    pub fn is_valid(&self, len: usize, min_overlap: usize) -> bool {
        self.a1 <= self.a2
            && self.a2 < self.b1
            && self.b1 <= self.b2
            && self.b2 <= len
            && self.b1 - self.a2 >= min_overlap
    }
}

/// Draws uniformly over all `a1 ≤ a2 < b1 ≤ b2 ≤ M` with `b1 − a2 ≥
/// min_overlap`.
///
/// Draw order: `a2` from its marginal, then `b1` given `a2`, then `a1`
/// uniform on `[0, a2]`, then `b2` uniform on `[b1, M]`. The pair `(a2, b1)`
/// carries weight `(a2 + 1)(M − b1 + 1)`, the number of completions, which
/// makes the joint draw uniform over valid tuples.
pub fn sample_crop_pair(len: usize, min_overlap: usize, rng: &mut Rng) -> Result<CropPair> {
    ensure!(min_overlap >= 2, "minimum overlap must be >= 2, got {min_overlap}");
    ensure!(
        len >= min_overlap,
        "series length {len} is shorter than the minimum overlap {min_overlap}"
    );
    let tail = |a2: usize| -> u128 {
        let n = (len - a2 - min_overlap + 1) as u128;
        n * (n + 1) / 2
    };
    let a2_weights: Vec<u128> = (0..=len - min_overlap).map(|a2| (a2 as u128 + 1) * tail(a2)).collect();
    let a2 = draw_weighted(&a2_weights, rng);
    let b1_weights: Vec<u128> = (a2 + min_overlap..=len).map(|b1| (len - b1 + 1) as u128).collect();
    let b1 = a2 + min_overlap + draw_weighted(&b1_weights, rng);
    let a1 = rng.random_range(0..=a2);
    let b2 = rng.random_range(b1..=len);
    Ok(CropPair { a1, a2, b1, b2 })
}

fn draw_weighted(weights: &[u128], rng: &mut Rng) -> usize {
    let total: u128 = weights.iter().sum();
    let mut r = rng.random_range(0..total);
    for (i, &w) in weights.iter().enumerate() {
        if r < w {
            return i;
        }
        r -= w;
    }
    unreachable!("weighted draw exhausted")
}

/// The four crops fed to the encoder and where their overlap sits.
#[derive(Debug, Clone, PartialEq)]
pub struct Views {
    pub x_p: Series,
    pub x_q: Series,
    pub x_tilde_p: Series,
    pub x_tilde_q: Series,
    pub overlap: Overlap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Overlap {
    /// Start of the overlap inside the first crop.
    pub offset_p: usize,
    /// Start of the overlap inside the second crop.
    pub offset_q: usize,
    pub len: usize,
}

impl Overlap {
    pub fn of(cp: &CropPair) -> Self {
        let (offset_p, offset_q) = cp.overlap_offsets();
        Overlap {
            offset_p,
            offset_q,
            len: cp.overlap_len(),
        }
    }
}

/// Slices the raw and perturbed series with the same crop indices.
pub fn make_views(x: &Series, x_tilde: &Series, cp: &CropPair) -> Result<Views> {
    ensure!(
        x.len() == x_tilde.len() && x.n_features() == x_tilde.n_features(),
        "raw series ({}×{}) and perturbed series ({}×{}) differ in shape",
        x.len(),
        x.n_features(),
        x_tilde.len(),
        x_tilde.n_features()
    );
    ensure!(
        cp.is_valid(x.len(), 1),
        "crop pair {cp:?} is invalid for length {}",
        x.len()
    );
    let (p0, p1) = cp.first();
    let (q0, q1) = cp.second();
    Ok(Views {
        x_p: x.slice(p0, p1),
        x_q: x.slice(q0, q1),
        x_tilde_p: x_tilde.slice(p0, p1),
        x_tilde_q: x_tilde.slice(q0, q1),
        overlap: Overlap::of(cp),
    })
}
