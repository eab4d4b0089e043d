//! Alignment and uniformity of L2-normalized representations.

use crate::error::{ensure, Result};

fn unit(v: &[f64]) -> Result<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    ensure!(n > 0.0 && n.is_finite(), "cannot normalize a zero-norm vector");
    Ok(v.iter().map(|x| x / n).collect())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Mean `‖ẑ_p − ẑ_q‖²` over positive pairs.
pub fn alignment(zp: &[Vec<f64>], zq: &[Vec<f64>]) -> Result<f64> {
    ensure!(!zp.is_empty(), "alignment needs at least one pair");
    ensure!(zp.len() == zq.len(), "{} vs {} representations", zp.len(), zq.len());
    let mut total = 0.0;
    for (a, b) in zp.iter().zip(zq) {
        total += sq_dist(&unit(a)?, &unit(b)?);
    }
    Ok(total / zp.len() as f64)
}

/// `log mean_{i<j} exp(−2‖ẑ_i − ẑ_j‖²)`.
pub fn uniformity(z: &[Vec<f64>]) -> Result<f64> {
    ensure!(z.len() >= 2, "uniformity needs at least two samples");
    let u = z.iter().map(|v| unit(v)).collect::<Result<Vec<_>>>()?;
    let mut terms = Vec::with_capacity(u.len() * (u.len() - 1) / 2);
    for i in 0..u.len() {
        for j in i + 1..u.len() {
            terms.push(-2.0 * sq_dist(&u[i], &u[j]));
        }
    }
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = terms.iter().map(|t| (t - m).exp()).sum::<f64>() / terms.len() as f64;
    Ok(m + mean.ln())
}

/// Histogram of positive-pair distances `‖ẑ_p − ẑ_q‖₂` on `[0, 2]`, as
/// `(bin_center, count)`.
pub fn pair_distance_histogram(zp: &[Vec<f64>], zq: &[Vec<f64>], bins: usize) -> Result<Vec<(f64, usize)>> {
    ensure!(bins >= 1, "histogram needs at least one bin");
    ensure!(zp.len() == zq.len(), "{} vs {} representations", zp.len(), zq.len());
    let width = 2.0 / bins as f64;
    let mut counts = vec![0usize; bins];
    for (a, b) in zp.iter().zip(zq) {
        let d = sq_dist(&unit(a)?, &unit(b)?).sqrt();
        counts[((d / width) as usize).min(bins - 1)] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| ((i as f64 + 0.5) * width, c))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identical_pairs_are_aligned() {
        let z = vec![vec![1.0, 2.0], vec![-3.0, 0.5]];
        let scaled: Vec<Vec<f64>> = z.iter().map(|v| v.iter().map(|x| x * 4.0).collect()).collect();
        assert_eq!(alignment(&z, &scaled).unwrap(), 0.0);
    }

    #[test]
    fn antipodal_uniformity() {
        let u = uniformity(&[vec![1.0, 0.0], vec![-2.0, 0.0]]).unwrap();
        assert!((u + 8.0).abs() < 1e-12);
    }

    #[test]
    fn random_circle_matches_monte_carlo() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let z: Vec<Vec<f64>> = (0..1000)
            .map(|_| {
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                vec![a.cos(), a.sin()]
            })
            .collect();
        let u = uniformity(&z).unwrap();
        // Independent draws: E exp(−2‖ẑ_i − ẑ_j‖²) with ‖·‖² = 2 − 2cos θ.
        let mut mc = 0.0;
        let n = 200_000;
        for _ in 0..n {
            let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            mc += (-2.0 * (2.0 - 2.0 * th.cos())).exp();
        }
        let expected = (mc / n as f64).ln();
        assert!((u - expected).abs() < 0.05, "{u} vs {expected}");
    }

    #[test]
    fn zero_vector_rejected() {
        assert!(uniformity(&[vec![0.0, 0.0], vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn histogram_counts_every_pair() {
        let zp = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let zq = vec![vec![1.0, 0.0], vec![0.0, -1.0], vec![0.0, 1.0]];
        let h = pair_distance_histogram(&zp, &zq, 4).unwrap();
        assert_eq!(h.iter().map(|b| b.1).sum::<usize>(), 3);
        assert_eq!(h[0], (0.25, 1));
        assert_eq!(h[3].1, 1);
        assert_eq!(h[2].1, 1);
    }
}
