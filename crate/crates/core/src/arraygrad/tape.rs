use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};

use super::kernels::{
    contrast_backward, contrast_forward, conv1d_backward, conv1d_forward, maxpool_forward, same_padding,
    ContrastLayout, ConvDims, PoolDims, PoolPadding,
};
use super::{NdArray, Scalar};
use crate::error::{ensure, Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy)]
enum ContrastKind {
    Temporal,
    Instance,
}

#[derive(Debug)]
enum Op<F> {
    Leaf,
    Conv1d {
        input: Var,
        weight: Var,
        bias: Var,
        dims: ConvDims,
    },
    MaxPool {
        input: Var,
        argmax: Vec<usize>,
    },
    LeakyRelu {
        input: Var,
        slope: F,
    },
    Relu {
        input: Var,
    },
    Linear {
        input: Var,
        weight: Var,
        bias: Var,
        rows: usize,
        fan_in: usize,
        fan_out: usize,
    },
    Add {
        lhs: Var,
        rhs: Var,
    },
    Concat {
        parts: Vec<Var>,
        widths: Vec<usize>,
        outer: usize,
        inner: usize,
    },
    SwapLast {
        input: Var,
        outer: usize,
        rows: usize,
        cols: usize,
    },
    SliceTime {
        input: Var,
        start: usize,
        full_len: usize,
    },
    MaskTime {
        input: Var,
        masked: Vec<bool>,
    },
    Sum {
        input: Var,
    },
    Dot {
        input: Var,
        weights: NdArray<F>,
    },
    Contrast {
        zp: Var,
        zq: Var,
        kind: ContrastKind,
    },
    LinComb {
        terms: Vec<(Var, F)>,
    },
}

impl<F> Op<F> {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Conv1d { .. } => "conv1d",
            Op::MaxPool { .. } => "maxpool1d",
            Op::LeakyRelu { .. } => "leaky_relu",
            Op::Relu { .. } => "relu",
            Op::Linear { .. } => "linear",
            Op::Add { .. } => "add",
            Op::Concat { .. } => "concat",
            Op::SwapLast { .. } => "transpose",
            Op::SliceTime { .. } => "slice_time",
            Op::MaskTime { .. } => "mask_time",
            Op::Sum { .. } => "sum",
            Op::Dot { .. } => "dot",
            Op::Contrast {
                kind: ContrastKind::Temporal,
                ..
            } => "temporal_loss",
            Op::Contrast {
                kind: ContrastKind::Instance,
                ..
            } => "instance_loss",
            Op::LinComb { .. } => "lincomb",
        }
    }
}

#[derive(Debug)]
struct Node<F> {
    value: NdArray<F>,
    op: Op<F>,
}

/// Recording of a computation in execution order.
///
/// Every op validates shapes, computes its value eagerly, and refuses to
/// record non-finite output.
#[derive(Debug, Default)]
pub struct Tape<F> {
    nodes: Vec<Node<F>>,
}

/// Result of [`Tape::backward`]: one accumulator per recorded node.
#[derive(Debug)]
pub struct Gradients<F> {
    grads: Vec<Option<NdArray<F>>>,
    shapes: Vec<Vec<usize>>,
}

impl<F: Scalar> Gradients<F> {
    /// Gradient of the root with respect to `var`; exact zeros when `var`
    /// does not influence the root.
    pub fn get(&self, var: Var) -> NdArray<F> {
        match &self.grads[var.0] {
            Some(g) => g.clone(),
            None => NdArray::zeros(&self.shapes[var.0]),
        }
    }

    pub fn get_ref(&self, var: Var) -> Option<&NdArray<F>> {
        self.grads[var.0].as_ref()
    }

    pub fn take(&mut self, var: Var) -> NdArray<F> {
        self.grads[var.0]
            .take()
            .unwrap_or_else(|| NdArray::zeros(&self.shapes[var.0]))
    }
}

impl<F: Scalar> Tape<F> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input (parameter or constant).
    pub fn leaf(&mut self, value: NdArray<F>) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, var: Var) -> &NdArray<F> {
        &self.nodes[var.0].value
    }

    fn push(&mut self, value: NdArray<F>, op: Op<F>) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NumericFailure(format!("non-finite output from {}", op.name())));
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    /// Same-length dilated convolution of a `B×C_in×T` input with a
    /// `C_out×C_in×k` kernel:
    /// `out[b,o,t] = bias[o] + Σ_{c,j} in[b,c,t + d·j − pad_left]·w[o,c,j]`
    /// with zeros outside the input.
    pub fn conv1d(&mut self, input: Var, weight: Var, bias: Var, dilation: usize) -> Result<Var> {
        let (batch, c_in, len) = self.value(input).dims3("conv1d input")?;
        let (c_out, w_in, kernel) = self.value(weight).dims3("conv1d weight")?;
        ensure!(kernel >= 1, "conv1d kernel must be >= 1");
        ensure!(dilation >= 1, "conv1d dilation must be >= 1, got {dilation}");
        ensure!(
            w_in == c_in,
            "conv1d weight expects {w_in} input channels, input has {c_in}"
        );
        ensure!(
            self.shape(bias) == [c_out],
            "conv1d bias shape {:?} does not match {c_out} output channels",
            self.shape(bias)
        );
        let (pl, pr) = same_padding(kernel, dilation);
        let span = dilation * (kernel - 1) + 1;
        ensure!(
            span <= len + pl + pr,
            "conv1d effective span {span} exceeds padded length {}",
            len + pl + pr
        );
        let dims = ConvDims {
            batch,
            c_in,
            c_out,
            len,
            kernel,
            dilation,
        };
        let out = conv1d_forward(
            self.value(input).data(),
            self.value(weight).data(),
            self.value(bias).data(),
            dims,
        );
        let value = NdArray::new(vec![batch, c_out, len], out)?;
        self.push(
            value,
            Op::Conv1d {
                input,
                weight,
                bias,
                dims,
            },
        )
    }

    /// Max pooling over the last axis of a `B×C×T` array.
    pub fn maxpool1d(&mut self, input: Var, kernel: usize, stride: usize, padding: PoolPadding) -> Result<Var> {
        let (b, c, t) = self.value(input).dims3("maxpool1d input")?;
        self.pool_axis(input, b * c, t, 1, kernel, stride, padding)
    }

    /// Max pooling over the middle (time) axis of a `B×T×H` array.
    pub fn maxpool_time(&mut self, input: Var, kernel: usize, stride: usize, padding: PoolPadding) -> Result<Var> {
        let (b, t, h) = self.value(input).dims3("maxpool_time input")?;
        self.pool_axis(input, b, t, h, kernel, stride, padding)
    }

    #[allow(clippy::too_many_arguments)]
    fn pool_axis(
        &mut self,
        input: Var,
        outer: usize,
        len: usize,
        inner: usize,
        kernel: usize,
        stride: usize,
        padding: PoolPadding,
    ) -> Result<Var> {
        ensure!(kernel >= 1, "pool kernel must be >= 1");
        ensure!(stride >= 1, "pool stride must be >= 1");
        ensure!(
            padding != PoolPadding::Same || stride == 1,
            "same-length pooling requires stride 1, got {stride}"
        );
        let dims = PoolDims {
            outer,
            len,
            inner,
            kernel,
            stride,
            padding,
        };
        let (values, argmax) = maxpool_forward(self.value(input).data(), dims);
        let mut shape = self.shape(input).to_vec();
        let axis = if inner == 1 { shape.len() - 1 } else { 1 };
        shape[axis] = dims.out_len();
        let value = NdArray::new(shape, values)?;
        self.push(value, Op::MaxPool { input, argmax })
    }

    pub fn leaky_relu(&mut self, input: Var, slope: f64) -> Result<Var> {
        ensure!(
            slope > 0.0 && slope < 1.0,
            "leaky_relu slope must lie in (0, 1), got {slope}"
        );
        let s = F::from_f64(slope);
        let value = self.value(input).map(|v| if v >= F::zero() { v } else { s * v });
        self.push(value, Op::LeakyRelu { input, slope: s })
    }

    pub fn relu(&mut self, input: Var) -> Result<Var> {
        let value = self.value(input).map(|v| v.max(F::zero()));
        self.push(value, Op::Relu { input })
    }

    /// Affine map `x·W + b` applied to every row of a `B×T×F` input.
    pub fn linear(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let (b, t, f) = self.value(input).dims3("linear input")?;
        let (wf, g) = match self.shape(weight) {
            [wf, g] => (*wf, *g),
            s => return Err(Error::invalid(format!("linear weight must be 2-D, got {s:?}"))),
        };
        ensure!(wf == f, "linear weight expects {wf} features, input has {f}");
        ensure!(
            self.shape(bias) == [g],
            "linear bias shape {:?} does not match {g} outputs",
            self.shape(bias)
        );
        let rows = b * t;
        let x = ArrayView2::from_shape((rows, f), self.value(input).data()).expect("linear x");
        let w = ArrayView2::from_shape((f, g), self.value(weight).data()).expect("linear w");
        let bias_v = self.value(bias).data();
        let mut out = vec![F::zero(); rows * g];
        for r in 0..rows {
            out[r * g..(r + 1) * g].copy_from_slice(bias_v);
        }
        {
            let mut y = ArrayViewMut2::from_shape((rows, g), &mut out).expect("linear y");
            general_mat_mul(F::one(), &x, &w, F::one(), &mut y);
        }
        let value = NdArray::new(vec![b, t, g], out)?;
        self.push(
            value,
            Op::Linear {
                input,
                weight,
                bias,
                rows,
                fan_in: f,
                fan_out: g,
            },
        )
    }

    pub fn add(&mut self, lhs: Var, rhs: Var) -> Result<Var> {
        ensure!(
            self.shape(lhs) == self.shape(rhs),
            "add shape mismatch: {:?} vs {:?}",
            self.shape(lhs),
            self.shape(rhs)
        );
        let mut value = self.value(lhs).clone();
        value.add_assign(self.value(rhs));
        self.push(value, Op::Add { lhs, rhs })
    }

    /// Concatenates `B×C_i×T` arrays along the channel axis.
    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        ensure!(!parts.is_empty(), "concat needs at least one input");
        let (b, _, t) = self.value(parts[0]).dims3("concat input")?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (pb, pc, pt) = self.value(p).dims3("concat input")?;
            ensure!(
                pb == b && pt == t,
                "concat inputs disagree on batch/time: {:?} vs {:?}",
                self.shape(parts[0]),
                self.shape(p)
            );
            widths.push(pc);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(b * total * t);
        for bi in 0..b {
            for (&p, &c) in parts.iter().zip(&widths) {
                let d = self.value(p).data();
                out.extend_from_slice(&d[bi * c * t..(bi + 1) * c * t]);
            }
        }
        let value = NdArray::new(vec![b, total, t], out)?;
        self.push(
            value,
            Op::Concat {
                parts: parts.to_vec(),
                widths,
                outer: b,
                inner: t,
            },
        )
    }

    /// Swaps the last two axes of a 3-axis array (`B×T×C ↔ B×C×T`).
    pub fn transpose_last(&mut self, input: Var) -> Result<Var> {
        let (outer, rows, cols) = self.value(input).dims3("transpose input")?;
        let out = swap_last(self.value(input).data(), outer, rows, cols);
        let value = NdArray::new(vec![outer, cols, rows], out)?;
        self.push(
            value,
            Op::SwapLast {
                input,
                outer,
                rows,
                cols,
            },
        )
    }

    /// Time window `[start, start+len)` of a `B×T×H` array.
    pub fn slice_time(&mut self, input: Var, start: usize, len: usize) -> Result<Var> {
        let (b, t, h) = self.value(input).dims3("slice_time input")?;
        ensure!(
            len >= 1 && start + len <= t,
            "time slice [{start}, {}) out of range for length {t}",
            start + len
        );
        let d = self.value(input).data();
        let mut out = Vec::with_capacity(b * len * h);
        for bi in 0..b {
            let base = bi * t * h;
            out.extend_from_slice(&d[base + start * h..base + (start + len) * h]);
        }
        let value = NdArray::new(vec![b, len, h], out)?;
        self.push(
            value,
            Op::SliceTime {
                input,
                start,
                full_len: t,
            },
        )
    }

    /// Zeroes the rows of a `B×T×H` array whose `masked[b·T + t]` is set.
    pub fn mask_time(&mut self, input: Var, masked: &[bool]) -> Result<Var> {
        let (b, t, h) = self.value(input).dims3("mask_time input")?;
        ensure!(
            masked.len() == b * t,
            "mask has {} entries, expected {}",
            masked.len(),
            b * t
        );
        let mut value = self.value(input).clone();
        for (row, &m) in value.data_mut().chunks_exact_mut(h).zip(masked) {
            if m {
                row.fill(F::zero());
            }
        }
        self.push(
            value,
            Op::MaskTime {
                input,
                masked: masked.to_vec(),
            },
        )
    }

    pub fn sum(&mut self, input: Var) -> Result<Var> {
        let total = self.value(input).data().iter().copied().sum::<F>();
        self.push(NdArray::scalar(total), Op::Sum { input })
    }

    /// `Σ input ⊙ weights` for constant `weights` of the same shape.
    pub fn dot(&mut self, input: Var, weights: &NdArray<F>) -> Result<Var> {
        ensure!(
            self.shape(input) == weights.shape(),
            "dot shape mismatch: {:?} vs {:?}",
            self.shape(input),
            weights.shape()
        );
        let total = self
            .value(input)
            .data()
            .iter()
            .zip(weights.data())
            .map(|(&x, &w)| x * w)
            .sum::<F>();
        self.push(
            NdArray::scalar(total),
            Op::Dot {
                input,
                weights: weights.clone(),
            },
        )
    }

    /// Mean over anchors `(b,t)` of the softmax contrast of `zp[b,t]·zq[b,t]`
    /// against every `zp[b,t]·zq[b,t̃]` and `zp[b,t]·zp[b,t̃]`, `t̃ ≠ t`.
    pub fn temporal_loss(&mut self, zp: Var, zq: Var) -> Result<Var> {
        self.contrast(zp, zq, ContrastKind::Temporal)
    }

    /// As [`Tape::temporal_loss`] with the contrast running over batch items.
    pub fn instance_loss(&mut self, zp: Var, zq: Var) -> Result<Var> {
        self.contrast(zp, zq, ContrastKind::Instance)
    }

    fn contrast(&mut self, zp: Var, zq: Var, kind: ContrastKind) -> Result<Var> {
        let (b, t, h) = self.value(zp).dims3("contrastive loss input")?;
        ensure!(
            self.shape(zp) == self.shape(zq),
            "contrastive loss shape mismatch: {:?} vs {:?}",
            self.shape(zp),
            self.shape(zq)
        );
        let layout = contrast_layout(kind, b, t, h);
        let total = contrast_forward(self.value(zp).data(), self.value(zq).data(), layout);
        let value = NdArray::scalar(F::from_f64(total / (b * t) as f64));
        self.push(value, Op::Contrast { zp, zq, kind })
    }

    /// `constant + Σ coef·x` over scalar inputs.
    pub fn lincomb(&mut self, terms: &[(Var, f64)], constant: f64) -> Result<Var> {
        let mut total = F::from_f64(constant);
        let mut recorded = Vec::with_capacity(terms.len());
        for &(v, c) in terms {
            ensure!(
                self.value(v).len() == 1,
                "lincomb expects scalar inputs, got shape {:?}",
                self.shape(v)
            );
            let c = F::from_f64(c);
            total = total + c * self.value(v).data()[0];
            recorded.push((v, c));
        }
        self.push(NdArray::scalar(total), Op::LinComb { terms: recorded })
    }

    /// Reverse sweep from a scalar `root`.
    pub fn backward(&self, root: Var) -> Result<Gradients<F>> {
        ensure!(root.0 < self.nodes.len(), "root is not on this tape");
        ensure!(
            self.value(root).len() == 1,
            "backward needs a scalar root, got shape {:?}",
            self.shape(root)
        );
        let mut grads: Vec<Option<NdArray<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(NdArray::full(self.shape(root), F::one()));
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else {
                continue;
            };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn propagate(&self, i: usize, g: &NdArray<F>, grads: &mut [Option<NdArray<F>>]) {
        let acc = |grads: &mut [Option<NdArray<F>>], v: Var| -> usize {
            if grads[v.0].is_none() {
                grads[v.0] = Some(NdArray::zeros(self.shape(v)));
            }
            v.0
        };
        let gd = g.data();
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Conv1d {
                input,
                weight,
                bias,
                dims,
            } => {
                let mut gx = NdArray::zeros(self.shape(*input));
                let mut gw = NdArray::zeros(self.shape(*weight));
                let mut gb = NdArray::zeros(self.shape(*bias));
                conv1d_backward(
                    self.value(*input).data(),
                    self.value(*weight).data(),
                    gd,
                    *dims,
                    gx.data_mut(),
                    gw.data_mut(),
                    gb.data_mut(),
                );
                accumulate(grads, *input, gx);
                accumulate(grads, *weight, gw);
                accumulate(grads, *bias, gb);
            }
            Op::MaxPool { input, argmax } => {
                let ix = acc(grads, *input);
                let gx = grads[ix].as_mut().unwrap().data_mut();
                for (&src, &gv) in argmax.iter().zip(gd) {
                    gx[src] = gx[src] + gv;
                }
            }
            Op::LeakyRelu { input, slope } => {
                let ix = acc(grads, *input);
                let x = self.value(*input).data();
                let gx = grads[ix].as_mut().unwrap().data_mut();
                for ((gxv, &xv), &gv) in gx.iter_mut().zip(x).zip(gd) {
                    *gxv = *gxv + if xv >= F::zero() { gv } else { *slope * gv };
                }
            }
            Op::Relu { input } => {
                let ix = acc(grads, *input);
                let x = self.value(*input).data();
                let gx = grads[ix].as_mut().unwrap().data_mut();
                for ((gxv, &xv), &gv) in gx.iter_mut().zip(x).zip(gd) {
                    if xv > F::zero() {
                        *gxv = *gxv + gv;
                    }
                }
            }
            Op::Linear {
                input,
                weight,
                bias,
                rows,
                fan_in,
                fan_out,
            } => {
                let (rows, f, gdim) = (*rows, *fan_in, *fan_out);
                let gy = ArrayView2::from_shape((rows, gdim), gd).expect("linear gy");
                let x = ArrayView2::from_shape((rows, f), self.value(*input).data()).unwrap();
                let w = ArrayView2::from_shape((f, gdim), self.value(*weight).data()).unwrap();
                let mut gx = NdArray::zeros(self.shape(*input));
                let mut gw = NdArray::zeros(self.shape(*weight));
                let mut gb = NdArray::zeros(self.shape(*bias));
                {
                    let mut gxv = ArrayViewMut2::from_shape((rows, f), gx.data_mut()).unwrap();
                    general_mat_mul(F::one(), &gy, &w.t(), F::zero(), &mut gxv);
                    let mut gwv = ArrayViewMut2::from_shape((f, gdim), gw.data_mut()).unwrap();
                    general_mat_mul(F::one(), &x.t(), &gy, F::zero(), &mut gwv);
                }
                for row in gy.rows() {
                    for (b, &v) in gb.data_mut().iter_mut().zip(row.iter()) {
                        *b = *b + v;
                    }
                }
                accumulate(grads, *input, gx);
                accumulate(grads, *weight, gw);
                accumulate(grads, *bias, gb);
            }
            Op::Add { lhs, rhs } => {
                for v in [*lhs, *rhs] {
                    let iv = acc(grads, v);
                    grads[iv].as_mut().unwrap().add_assign(g);
                }
            }
            Op::Concat {
                parts,
                widths,
                outer,
                inner,
            } => {
                let total: usize = widths.iter().sum();
                let mut offset = 0;
                for (&p, &c) in parts.iter().zip(widths) {
                    let ip = acc(grads, p);
                    let gp = grads[ip].as_mut().unwrap().data_mut();
                    for b in 0..*outer {
                        let src = &gd[(b * total + offset) * inner..(b * total + offset + c) * inner];
                        let dst = &mut gp[b * c * inner..(b + 1) * c * inner];
                        for (d, &s) in dst.iter_mut().zip(src) {
                            *d = *d + s;
                        }
                    }
                    offset += c;
                }
            }
            Op::SwapLast {
                input,
                outer,
                rows,
                cols,
            } => {
                let back = swap_last(gd, *outer, *cols, *rows);
                let ix = acc(grads, *input);
                for (d, s) in grads[ix].as_mut().unwrap().data_mut().iter_mut().zip(back) {
                    *d = *d + s;
                }
            }
            Op::SliceTime { input, start, full_len } => {
                let shape = g.shape();
                let (b, len, h) = (shape[0], shape[1], shape[2]);
                let ix = acc(grads, *input);
                let gx = grads[ix].as_mut().unwrap().data_mut();
                for bi in 0..b {
                    let dst = bi * full_len * h + start * h;
                    for k in 0..len * h {
                        gx[dst + k] = gx[dst + k] + gd[bi * len * h + k];
                    }
                }
            }
            Op::MaskTime { input, masked } => {
                let h = g.shape()[2];
                let ix = acc(grads, *input);
                let gx = grads[ix].as_mut().unwrap().data_mut();
                for ((dst, src), &m) in gx.chunks_exact_mut(h).zip(gd.chunks_exact(h)).zip(masked) {
                    if !m {
                        for (d, &s) in dst.iter_mut().zip(src) {
                            *d = *d + s;
                        }
                    }
                }
            }
            Op::Sum { input } => {
                let ix = acc(grads, *input);
                let gv = gd[0];
                for d in grads[ix].as_mut().unwrap().data_mut() {
                    *d = *d + gv;
                }
            }
            Op::Dot { input, weights } => {
                let ix = acc(grads, *input);
                let gv = gd[0];
                for (d, &w) in grads[ix].as_mut().unwrap().data_mut().iter_mut().zip(weights.data()) {
                    *d = *d + gv * w;
                }
            }
            Op::Contrast { zp, zq, kind } => {
                let (b, t, h) = self.value(*zp).dims3("contrast").expect("recorded shape");
                let layout = contrast_layout(*kind, b, t, h);
                let scale = gd[0] / F::from_f64((b * t) as f64);
                let mut gp = NdArray::zeros(self.shape(*zp));
                let mut gq = NdArray::zeros(self.shape(*zq));
                contrast_backward(
                    self.value(*zp).data(),
                    self.value(*zq).data(),
                    layout,
                    scale,
                    gp.data_mut(),
                    gq.data_mut(),
                );
                accumulate(grads, *zp, gp);
                accumulate(grads, *zq, gq);
            }
            Op::LinComb { terms } => {
                for &(v, c) in terms {
                    let iv = acc(grads, v);
                    let d = grads[iv].as_mut().unwrap().data_mut();
                    d[0] = d[0] + c * gd[0];
                }
            }
        }
    }
}

/// Adds a freshly computed contribution into the accumulator of `var`.
fn accumulate<F: Scalar>(grads: &mut [Option<NdArray<F>>], var: Var, value: NdArray<F>) {
    match &mut grads[var.0] {
        Some(existing) => existing.add_assign(&value),
        slot @ None => *slot = Some(value),
    }
}

fn contrast_layout(kind: ContrastKind, b: usize, t: usize, h: usize) -> ContrastLayout {
    match kind {
        ContrastKind::Temporal => ContrastLayout::temporal(b, t, h),
        ContrastKind::Instance => ContrastLayout::instance(b, t, h),
    }
}

fn swap_last<F: Copy>(d: &[F], outer: usize, rows: usize, cols: usize) -> Vec<F> {
    let mut out = Vec::with_capacity(d.len());
    for o in 0..outer {
        let block = &d[o * rows * cols..(o + 1) * rows * cols];
        for c in 0..cols {
            for r in 0..rows {
                out.push(block[r * cols + c]);
            }
        }
    }
    out
}
