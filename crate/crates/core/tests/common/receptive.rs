//! Empirical receptive field of the unit path, measured from input gradients.

use coincept::arraygrad::{NdArray, Tape};
use coincept::encoder::{encode_graph, init_params, EncoderConfig, EncoderParams};

/// Single-unit encoder of `blocks` blocks with base kernel `kernel` and the
/// pooling branch switched off.
pub fn isolated_unit(kernel: usize, blocks: usize) -> (EncoderConfig, EncoderParams<f64>) {
    let cfg = EncoderConfig {
        n_features: 1,
        hidden_dim: 2,
        output_dim: 2,
        n_blocks: blocks,
        base_kernels: vec![kernel],
        leaky_slope: 0.01,
    };
    let mut params = init_params::<f64>(&cfg, 7).unwrap();
    for b in 1..=blocks {
        let w = params.get_mut(&format!("block{b}.pool.weight")).unwrap();
        w.data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
    (cfg, params)
}

/// Width of the set of input timesteps with nonzero gradient on the first
/// output channel at the central timestep, for the series length `len`.
pub fn support_width(kernel: usize, blocks: usize, len: usize) -> usize {
    let (cfg, params) = isolated_unit(kernel, blocks);
    let mut tape = Tape::new();
    let pv: Vec<_> = params.values().iter().map(|p| tape.leaf(p.clone())).collect();
    let x = NdArray::from_fn(&[1, len, 1], |i| ((i as f64) * 0.37).sin() + 0.1 * ((i % 7) as f64));
    let xv = tape.leaf(x);
    let rep = encode_graph(&mut tape, &cfg, &pv, xv, None).unwrap();
    let mut probe = NdArray::zeros(tape.value(rep).shape());
    probe.data_mut()[(len / 2) * cfg.output_dim] = 1.0;
    let root = tape.dot(rep, &probe).unwrap();
    let grads = tape.backward(root).unwrap();
    let g = grads.get(xv);
    let nz: Vec<usize> = (0..len).filter(|&t| g.data()[t] != 0.0).collect();
    nz.last().unwrap() - nz.first().unwrap() + 1
}

/// `(kernel, blocks, measured, expected)` over the standard grid.
pub fn grid() -> Vec<(usize, usize, usize, usize)> {
    let mut out = Vec::new();
    for k in [2usize, 5, 8] {
        for i in 1..=3usize {
            let expected = (2 * k - 1).pow(i as u32);
            let len = 2 * expected + 64;
            out.push((k, i, support_width(k, i, len), expected));
        }
    }
    out
}
