//! FFT energy split used as an oracle for low-pass behaviour.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// One-sided power spectrum `|X_f|²`, `f = 0..=n/2`.
pub fn power(signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf[..=n / 2].iter().map(|c| c.norm_sqr()).collect()
}

/// Energy below and at-or-above the normalized frequency `cutoff` (cycles per
/// sample, in `(0, 0.5]`).
pub fn band_energy(signal: &[f64], cutoff: f64) -> (f64, f64) {
    let n = signal.len() as f64;
    let p = power(signal);
    let mut low = 0.0;
    let mut high = 0.0;
    for (f, e) in p.iter().enumerate() {
        if (f as f64) / n < cutoff {
            low += e;
        } else {
            high += e;
        }
    }
    (low, high)
}
