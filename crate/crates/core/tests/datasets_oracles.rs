mod common;

use coincept::datasets::{synth_classes, synth_toy, ClassShape, ClassesConfig, ToyConfig};
use coincept::wavelet::{d4_filters, max_level, perturb, PerturbConfig};
use common::spectrum::{band_energy, power};

fn peak_frequency(x: &[f64]) -> f64 {
    let p = power(x);
    let k = (1..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
    k as f64 / x.len() as f64
}

#[test]
fn toy_end_regions_peak_at_noise_frequencies() {
    let cfg = ToyConfig::default();
    let toy = synth_toy(&cfg, 3).unwrap();
    let v = toy.series.data();
    // Remove the base sine so the noise tone dominates.
    for (range, f) in [(&toy.regions[0], cfg.noise_freq1), (&toy.regions[2], cfg.noise_freq2)] {
        let seg = &v[range.clone()];
        let hp: Vec<f64> = seg.windows(2).map(|w| w[1] - w[0]).collect();
        let est = peak_frequency(&hp);
        assert!((est - f).abs() <= 1.0 / hp.len() as f64, "peak {est} vs {f}");
    }
}

#[test]
fn noiseless_classes_match_their_template() {
    let cfg = ClassesConfig {
        sigma: 0.0,
        per_class: 10,
        ..ClassesConfig::default()
    };
    let ds = synth_classes(&cfg, 8).unwrap();
    let p = cfg.period as usize;
    let mut correct = 0;
    for (s, &label) in ds.test.series.iter().zip(&ds.test.labels) {
        // Nearest template: max correlation over all circular shifts of one period.
        let best = (0..3)
            .max_by(|&a, &b| {
                let score = |c: usize| {
                    (0..p * 8)
                        .map(|shift| {
                            let tpl: Vec<f64> = (0..s.len())
                                .map(|t| ClassShape::ALL[c].eval((t * 8 + shift) as f64 / (8.0 * cfg.period)))
                                .collect();
                            let norm = tpl.iter().map(|v| v * v).sum::<f64>().sqrt();
                            s.data().iter().zip(&tpl).map(|(x, y)| x * y).sum::<f64>() / norm
                        })
                        .fold(f64::NEG_INFINITY, f64::max)
                };
                score(a).total_cmp(&score(b))
            })
            .unwrap();
        if best == label {
            correct += 1;
        }
    }
    assert_eq!(correct, ds.test.len());
}

#[test]
fn perturbation_reduces_high_band_energy_of_toy() {
    let bank = d4_filters();
    for seed in 0..5 {
        let toy = synth_toy(&ToyConfig::default(), seed).unwrap();
        let x = toy.series.data();
        let level = max_level(x.len(), bank.len()).unwrap();
        let cutoff = 1.0 / f64::from(1u32 << (level + 1));
        let y = perturb(&toy.series, &PerturbConfig::default(), &bank).unwrap();
        let (_, hi_x) = band_energy(x, cutoff);
        let (_, hi_y) = band_energy(y.data(), cutoff);
        assert!(hi_y < hi_x, "seed {seed}: {hi_x} -> {hi_y}");
        // The noise tones alone are removed almost entirely.
        for r in [&toy.regions[0], &toy.regions[2]] {
            let hp = |v: &[f64]| -> f64 { v[r.clone()].windows(2).map(|w| (w[1] - w[0]).powi(2)).sum() };
            assert!(hp(y.data()) < 0.25 * hp(x), "seed {seed}");
        }
    }
}
