//! Central finite-difference oracle for tape gradients.

use coincept::arraygrad::{NdArray, Tape, Var};
use coincept::encoder::{encode_graph, init_params, EncoderConfig, EncoderParams};
use coincept::loss::{hierarchical_graph, LossConfig};
use coincept::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;

fn evaluate<B>(inputs: &[NdArray<f64>], build: &B) -> f64
where
    B: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|a| tape.leaf(a.clone())).collect();
    let out = build(&mut tape, &vars).expect("forward");
    tape.value(out).item().unwrap()
}

/// Largest per-input relative error `‖a − n‖₂ / max(‖a‖₂, ‖n‖₂)` between the
/// tape gradient and central differences with step `STEP`.
pub fn max_relative_error<B>(inputs: &[NdArray<f64>], build: B) -> f64
where
    B: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|a| tape.leaf(a.clone())).collect();
    let out = build(&mut tape, &vars).expect("forward");
    let grads = tape.backward(out).expect("backward");

    let mut worst = 0.0f64;
    for (i, input) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[i]);
        let mut numeric = vec![0.0; input.len()];
        let mut probe = inputs.to_vec();
        for k in 0..input.len() {
            let orig = input.data()[k];
            probe[i].data_mut()[k] = orig + STEP;
            let up = evaluate(&probe, &build);
            probe[i].data_mut()[k] = orig - STEP;
            let down = evaluate(&probe, &build);
            probe[i].data_mut()[k] = orig;
            numeric[k] = (up - down) / (2.0 * STEP);
        }
        let diff: f64 = analytic
            .data()
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n).powi(2))
            .sum::<f64>()
            .sqrt();
        let na = analytic.data().iter().map(|a| a * a).sum::<f64>().sqrt();
        let nn = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
        let scale = na.max(nn);
        if scale > 0.0 {
            worst = worst.max(diff / scale);
        }
    }
    worst
}

pub fn random(shape: &[usize], seed: u64, scale: f64) -> NdArray<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    NdArray::from_fn(shape, |_| rng.random_range(-scale..scale))
}

/// Per-primitive checks: (name, relative error).
pub fn primitive_errors() -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();
    for (i, (k, d, t)) in [(1usize, 1usize, 5usize), (2, 1, 6), (3, 2, 7), (2, 3, 9), (5, 2, 4)]
        .into_iter()
        .enumerate()
    {
        let s = 10 * i as u64;
        let err = max_relative_error(
            &[
                random(&[2, 3, t], s, 1.0),
                random(&[4, 3, k], s + 1, 1.0),
                random(&[4], s + 2, 1.0),
            ],
            move |tape, v| {
                let y = tape.conv1d(v[0], v[1], v[2], d)?;
                let w = tape.leaf(random(&[2, 4, t], 99, 1.0));
                weighted_sum(tape, y, w)
            },
        );
        out.push(("conv1d", err));
    }
    out.push((
        "maxpool1d same",
        max_relative_error(&[random(&[2, 3, 7], 21, 1.0)], |tape, v| {
            let y = tape.maxpool1d(v[0], 3, 1, coincept::arraygrad::PoolPadding::Same)?;
            let w = tape.leaf(random(&[2, 3, 7], 22, 1.0));
            weighted_sum(tape, y, w)
        }),
    ));
    out.push((
        "maxpool halving",
        max_relative_error(&[random(&[2, 5, 3], 23, 1.0)], |tape, v| {
            let y = tape.maxpool_time(v[0], 2, 2, coincept::arraygrad::PoolPadding::Ceil)?;
            let w = tape.leaf(random(&[2, 3, 3], 24, 1.0));
            weighted_sum(tape, y, w)
        }),
    ));
    out.push((
        "leaky_relu",
        max_relative_error(&[random(&[3, 4, 2], 25, 1.0)], |tape, v| {
            let y = tape.leaky_relu(v[0], 0.01)?;
            let w = tape.leaf(random(&[3, 4, 2], 26, 1.0));
            weighted_sum(tape, y, w)
        }),
    ));
    out.push((
        "linear",
        max_relative_error(
            &[
                random(&[2, 3, 4], 27, 1.0),
                random(&[4, 5], 28, 1.0),
                random(&[5], 29, 1.0),
            ],
            |tape, v| {
                let y = tape.linear(v[0], v[1], v[2])?;
                let w = tape.leaf(random(&[2, 3, 5], 30, 1.0));
                weighted_sum(tape, y, w)
            },
        ),
    ));
    out.push((
        "temporal_loss",
        max_relative_error(
            &[random(&[2, 5, 3], 31, 1.0), random(&[2, 5, 3], 32, 1.0)],
            |tape, v| tape.temporal_loss(v[0], v[1]),
        ),
    ));
    out.push((
        "instance_loss",
        max_relative_error(
            &[random(&[4, 3, 3], 33, 1.0), random(&[4, 3, 3], 34, 1.0)],
            |tape, v| tape.instance_loss(v[0], v[1]),
        ),
    ));
    out.push((
        "contrast self-pair",
        max_relative_error(&[random(&[3, 4, 2], 35, 1.0)], |tape, v| {
            let a = tape.temporal_loss(v[0], v[0])?;
            let b = tape.instance_loss(v[0], v[0])?;
            tape.lincomb(&[(a, 1.0), (b, 0.5)], 0.0)
        }),
    ));
    out.push((
        "structural ops",
        max_relative_error(
            &[random(&[2, 3, 4], 36, 1.0), random(&[2, 2, 4], 37, 1.0)],
            |tape, v| {
                let c = tape.concat_channels(&[v[0], v[1]])?;
                let t = tape.transpose_last(c)?;
                let s = tape.slice_time(t, 1, 2)?;
                let m = tape.mask_time(t, &[false, true, false, false, true, false, false, false])?;
                let a = tape.sum(s)?;
                let w = tape.leaf(random(&[2, 4, 5], 38, 1.0));
                let b = weighted_sum(tape, m, w)?;
                let hinge = tape.lincomb(&[(a, 0.7), (b, -1.3)], 0.25)?;
                let r = tape.relu(hinge)?;
                tape.lincomb(&[(r, 1.0), (a, 0.1)], 0.0)
            },
        ),
    ));
    out
}

fn weighted_sum(tape: &mut Tape<f64>, y: Var, w: Var) -> Result<Var> {
    let w = tape.value(w).clone();
    tape.dot(y, &w)
}

pub struct EndToEnd {
    pub cfg: EncoderConfig,
    pub params: EncoderParams<f64>,
    pub views: [NdArray<f64>; 4],
    pub overlap: (usize, usize, usize),
}

/// Kernels [2,3], output width 8, overlapping crops of a length-16
/// window.
pub fn end_to_end_setup() -> EndToEnd {
    end_to_end_with_blocks(2)
}

pub fn end_to_end_with_blocks(n_blocks: usize) -> EndToEnd {
    let cfg = EncoderConfig {
        n_features: 2,
        hidden_dim: 4,
        output_dim: 8,
        n_blocks,
        base_kernels: vec![2, 3],
        leaky_slope: 0.01,
    };
    let params = init_params(&cfg, 17).unwrap();
    // crop1 = [0, 12), crop2 = [5, 16): overlap [5, 12) of length 7.
    let views = [
        random(&[2, 12, 2], 41, 1.0),
        random(&[2, 11, 2], 42, 1.0),
        random(&[2, 12, 2], 43, 1.0),
        random(&[2, 11, 2], 44, 1.0),
    ];
    EndToEnd {
        cfg,
        params,
        views,
        overlap: (5, 0, 7),
    }
}

pub fn end_to_end_error(setup: &EndToEnd) -> f64 {
    let n_params = setup.params.values().len();
    let mut inputs: Vec<NdArray<f64>> = setup.params.values().to_vec();
    inputs.extend(setup.views.iter().cloned());
    let cfg = setup.cfg.clone();
    let (off_p, off_q, len) = setup.overlap;
    max_relative_error(&inputs, move |tape, v| {
        let params = &v[..n_params];
        let mut z = Vec::new();
        for (i, &x) in v[n_params..].iter().enumerate() {
            let rep = encode_graph(tape, &cfg, params, x, None)?;
            let off = if i % 2 == 0 { off_p } else { off_q };
            z.push(tape.slice_time(rep, off, len)?);
        }
        let out = hierarchical_graph(tape, [z[0], z[1], z[2], z[3]], &LossConfig::default())?;
        Ok(out.loss)
    })
}
