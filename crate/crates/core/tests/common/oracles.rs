//! Solver-independent references for the regression heads.

use coincept::tasks::classify::KernelClassifier;
use coincept::tasks::ridge::ridge_fit;
use nalgebra::DMatrix;

/// Gaussian elimination with partial pivoting on a dense row-major system.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            for c in 0..b[r].len() {
                b[r][c] -= f * b[col][c];
            }
        }
    }
    let m = b[0].len();
    let mut x = vec![vec![0.0; m]; n];
    for r in (0..n).rev() {
        for c in 0..m {
            let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k][c]).sum();
            x[r][c] = (b[r][c] - s) / a[r][r];
        }
    }
    x
}

/// Minimizes `½‖ZᶜW − Yᶜ‖² + ½λ‖W‖²` by gradient descent with step `1/L`.
pub fn ridge_by_descent(z: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let center = |m: &DMatrix<f64>| {
        let mut c = m.clone();
        for j in 0..m.ncols() {
            let mean = m.column(j).mean();
            c.column_mut(j).add_scalar_mut(-mean);
        }
        c
    };
    let zc = center(z);
    let yc = center(y);
    let lip = zc.iter().map(|v| v * v).sum::<f64>() + lambda;
    let mut w = DMatrix::zeros(z.ncols(), y.ncols());
    for _ in 0..200_000 {
        let g = zc.transpose() * (&zc * &w - &yc) + &w * lambda;
        if g.amax() < 1e-13 {
            break;
        }
        w -= g / lip;
    }
    w
}

pub fn ridge_problem() -> (DMatrix<f64>, DMatrix<f64>) {
    let z = DMatrix::from_fn(10, 3, |i, j| {
        ((i * 7 + j * 3) as f64 * 0.61).cos() + 0.2 * (i as f64) * (j as f64 - 1.0)
    });
    let y = DMatrix::from_fn(10, 2, |i, j| (i as f64 * 0.4 + j as f64).sin() + 0.3 * z[(i, 0)]);
    (z, y)
}

/// Max deviation between closed-form ridge and the descent minimizer.
pub fn ridge_oracle_error() -> f64 {
    let (z, y) = ridge_problem();
    let mut worst = 0.0f64;
    for lambda in [0.05, 0.5, 5.0] {
        let closed = ridge_fit(&z, &y, lambda).unwrap();
        let gd = ridge_by_descent(&z, &y, lambda);
        worst = worst.max((&closed.weights - gd).amax());
    }
    worst
}

/// Max deviation of classifier decision values from a dense exact solve of
/// `(K + I/C)A = Y`, over several sizes up to 50.
pub fn classifier_oracle_error() -> f64 {
    let mut worst = 0.0f64;
    for (n, classes, gamma, c) in [(20usize, 2usize, 0.7, 1.0), (35, 3, 0.2, 10.0), (50, 4, 1.5, 0.1)] {
        let x: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.91).cos(), (i % 5) as f64 * 0.1])
            .collect();
        let labels: Vec<usize> = (0..n).map(|i| (i * 7 + i / 3) % classes).collect();
        let test: Vec<Vec<f64>> = (0..15)
            .map(|i| vec![(i as f64 * 0.53).cos(), (i as f64 * 0.29).sin(), 0.05 * i as f64])
            .collect();
        let m = KernelClassifier::fit(&x, &labels, classes, gamma, c).unwrap();
        let dv = m.decision_values(&test);

        let k = |a: &[f64], b: &[f64]| (-gamma * a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>()).exp();
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| k(&x[i], &x[j]) + if i == j { 1.0 / c } else { 0.0 })
                    .collect()
            })
            .collect();
        let y: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..classes)
                    .map(|cl| if labels[i] == cl { 1.0 } else { -1.0 })
                    .collect()
            })
            .collect();
        let coef = gauss_solve(a, y);
        for (ti, t) in test.iter().enumerate() {
            for cl in 0..classes {
                let v: f64 = (0..n).map(|i| k(t, &x[i]) * coef[i][cl]).sum();
                worst = worst.max((v - dv[(ti, cl)]).abs());
            }
        }
    }
    worst
}
