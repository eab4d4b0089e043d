//! Raw forward/backward kernels over contiguous buffers. Shape checking lives
//! in the tape; these functions trust their extents.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2, ArrayViewMut2, ShapeBuilder};

use super::Scalar;

/// Left-biased zero padding that keeps the time length unchanged:
/// `left = ceil(d(k-1)/2)`, `right = floor(d(k-1)/2)`.
pub fn same_padding(kernel: usize, dilation: usize) -> (usize, usize) {
    let span = dilation * (kernel - 1);
    (span.div_ceil(2), span / 2)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvDims {
    pub batch: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub len: usize,
    pub kernel: usize,
    pub dilation: usize,
}

impl ConvDims {
    /// Output range `[t0, t1)` touched by tap `j` and the input shift for it.
    fn tap_range(&self, j: usize) -> Option<(usize, usize, isize)> {
        let (pad_left, _) = same_padding(self.kernel, self.dilation);
        let shift = (self.dilation * j) as isize - pad_left as isize;
        let t0 = (-shift).max(0) as usize;
        let t1 = (self.len as isize - shift).min(self.len as isize);
        if t1 <= t0 as isize {
            return None;
        }
        Some((t0, t1 as usize, shift))
    }

    fn tap_weight<'a, F>(&self, w: &'a [F], j: usize) -> ArrayView2<'a, F> {
        ArrayView2::from_shape(
            (self.c_out, self.c_in).strides((self.c_in * self.kernel, self.kernel)),
            &w[j..],
        )
        .expect("conv weight view")
    }
}

pub(crate) fn conv1d_forward<F: Scalar>(x: &[F], w: &[F], bias: &[F], dims: ConvDims) -> Vec<F> {
    let ConvDims {
        batch,
        c_in,
        c_out,
        len,
        kernel,
        ..
    } = dims;
    let mut out = vec![F::zero(); batch * c_out * len];
    for b in 0..batch {
        let xb =
            ArrayView2::from_shape((c_in, len), &x[b * c_in * len..(b + 1) * c_in * len]).expect("conv input view");
        let mut yb = ArrayViewMut2::from_shape((c_out, len), &mut out[b * c_out * len..(b + 1) * c_out * len])
            .expect("conv output view");
        for (o, mut row) in yb.rows_mut().into_iter().enumerate() {
            row.fill(bias[o]);
        }
        for j in 0..kernel {
            let Some((t0, t1, shift)) = dims.tap_range(j) else {
                continue;
            };
            let src = xb.slice(s![.., (t0 as isize + shift)..(t1 as isize + shift)]);
            let mut dst = yb.slice_mut(s![.., t0..t1]);
            general_mat_mul(F::one(), &dims.tap_weight(w, j), &src, F::one(), &mut dst);
        }
    }
    out
}

/// Accumulates input, weight and bias gradients of a same-padded conv.
pub(crate) fn conv1d_backward<F: Scalar>(
    x: &[F],
    w: &[F],
    grad_out: &[F],
    dims: ConvDims,
    grad_x: &mut [F],
    grad_w: &mut [F],
    grad_bias: &mut [F],
) {
    let ConvDims {
        batch,
        c_in,
        c_out,
        len,
        kernel,
        ..
    } = dims;
    for b in 0..batch {
        let xb =
            ArrayView2::from_shape((c_in, len), &x[b * c_in * len..(b + 1) * c_in * len]).expect("conv input view");
        let gyb = ArrayView2::from_shape((c_out, len), &grad_out[b * c_out * len..(b + 1) * c_out * len])
            .expect("conv grad view");
        for (o, row) in gyb.rows().into_iter().enumerate() {
            grad_bias[o] = grad_bias[o] + row.sum();
        }
        let mut gxb = ArrayViewMut2::from_shape((c_in, len), &mut grad_x[b * c_in * len..(b + 1) * c_in * len])
            .expect("conv input grad view");
        for j in 0..kernel {
            let Some((t0, t1, shift)) = dims.tap_range(j) else {
                continue;
            };
            let src_range = (t0 as isize + shift)..(t1 as isize + shift);
            let gy = gyb.slice(s![.., t0..t1]);
            {
                let mut gx = gxb.slice_mut(s![.., src_range.clone()]);
                general_mat_mul(F::one(), &dims.tap_weight(w, j).t(), &gy, F::one(), &mut gx);
            }
            let mut gw = ArrayViewMut2::from_shape((c_out, c_in).strides((c_in * kernel, kernel)), &mut grad_w[j..])
                .expect("conv weight grad view");
            let src = xb.slice(s![.., src_range]);
            general_mat_mul(F::one(), &gy, &src.t(), F::one(), &mut gw);
        }
    }
}

/// Window placement for max pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolPadding {
    /// Stride 1, windows centred with the same left-biased split as the
    /// convolutions; out-of-range taps are ignored. Length is preserved.
    Same,
    /// Windows start at multiples of the stride and are truncated at the end,
    /// giving `ceil(T / stride)` outputs. With kernel 2 / stride 2 a trailing
    /// lone element passes through.
    Ceil,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PoolDims {
    pub outer: usize,
    pub len: usize,
    pub inner: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: PoolPadding,
}

impl PoolDims {
    pub fn out_len(&self) -> usize {
        match self.padding {
            PoolPadding::Same => self.len,
            PoolPadding::Ceil => self.len.div_ceil(self.stride),
        }
    }

    fn window(&self, t: usize) -> (usize, usize) {
        match self.padding {
            PoolPadding::Same => {
                let left = (self.kernel - 1).div_ceil(2);
                let right = (self.kernel - 1) / 2;
                (t.saturating_sub(left), (t + right + 1).min(self.len))
            }
            PoolPadding::Ceil => {
                let start = t * self.stride;
                (start, (start + self.kernel).min(self.len))
            }
        }
    }
}

/// Returns pooled values and, per output, the flat input index of the
/// first maximum in its window.
pub(crate) fn maxpool_forward<F: Scalar>(x: &[F], dims: PoolDims) -> (Vec<F>, Vec<usize>) {
    let out_len = dims.out_len();
    let n = dims.outer * out_len * dims.inner;
    let mut values = Vec::with_capacity(n);
    let mut argmax = Vec::with_capacity(n);
    for o in 0..dims.outer {
        for t in 0..out_len {
            let (lo, hi) = dims.window(t);
            for i in 0..dims.inner {
                let base = o * dims.len * dims.inner + i;
                let mut best = base + lo * dims.inner;
                for u in lo + 1..hi {
                    let idx = base + u * dims.inner;
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                values.push(x[best]);
                argmax.push(best);
            }
        }
    }
    (values, argmax)
}

/// Row layout for softmax contrast. Each group holds `n` anchor rows of
/// width `h`; rows within a group are `row_stride` apart and groups are
/// `group_stride` apart.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ContrastLayout {
    pub groups: usize,
    pub n: usize,
    pub h: usize,
    pub group_stride: usize,
    pub row_stride: usize,
}

impl ContrastLayout {
    /// Contrast over timesteps within each instance of a `B×T×H` array.
    pub fn temporal(b: usize, t: usize, h: usize) -> Self {
        ContrastLayout {
            groups: b,
            n: t,
            h,
            group_stride: t * h,
            row_stride: h,
        }
    }

    /// Contrast over instances at each timestep of a `B×T×H` array.
    pub fn instance(b: usize, t: usize, h: usize) -> Self {
        ContrastLayout {
            groups: t,
            n: b,
            h,
            group_stride: h,
            row_stride: t * h,
        }
    }

    fn rows<'a, F>(&self, z: &'a [F], g: usize) -> ArrayView2<'a, F> {
        ArrayView2::from_shape(
            (self.n, self.h).strides((self.row_stride, 1)),
            &z[g * self.group_stride..],
        )
        .expect("contrast rows view")
    }
}

/// Similarity matrices `A Qᵀ`, `A Aᵀ` and the per-row log-partition.
fn group_logits<F: Scalar>(a: &ArrayView2<F>, q: &ArrayView2<F>) -> (Array2<F>, Array2<F>, Vec<F>) {
    let n = a.nrows();
    let mut sq = Array2::zeros((n, n));
    let mut sp = Array2::zeros((n, n));
    general_mat_mul(F::one(), a, &q.t(), F::zero(), &mut sq);
    general_mat_mul(F::one(), a, &a.t(), F::zero(), &mut sp);
    let mut lse = Vec::with_capacity(n);
    for i in 0..n {
        let mut m = sq[[i, 0]];
        for j in 0..n {
            m = m.max(sq[[i, j]]);
            if j != i {
                m = m.max(sp[[i, j]]);
            }
        }
        let mut total = F::zero();
        for j in 0..n {
            total = total + (sq[[i, j]] - m).exp();
            if j != i {
                total = total + (sp[[i, j]] - m).exp();
            }
        }
        lse.push(m + total.ln());
    }
    (sq, sp, lse)
}

/// Sum over all anchors of `-log softmax` of the positive logit.
pub(crate) fn contrast_forward<F: Scalar>(zp: &[F], zq: &[F], layout: ContrastLayout) -> f64 {
    let mut total = 0.0f64;
    for g in 0..layout.groups {
        let a = layout.rows(zp, g);
        let q = layout.rows(zq, g);
        let (sq, _, lse) = group_logits(&a, &q);
        for (i, l) in lse.iter().enumerate() {
            total += (*l - sq[[i, i]]).as_f64();
        }
    }
    total
}

/// Accumulates `scale · ∂(sum of anchor losses)` into `grad_p` and `grad_q`.
pub(crate) fn contrast_backward<F: Scalar>(
    zp: &[F],
    zq: &[F],
    layout: ContrastLayout,
    scale: F,
    grad_p: &mut [F],
    grad_q: &mut [F],
) {
    let n = layout.n;
    for g in 0..layout.groups {
        let a = layout.rows(zp, g);
        let q = layout.rows(zq, g);
        let (mut sq, mut sp, lse) = group_logits(&a, &q);
        // Turn logits into scaled softmax weights, minus the positive target.
        for i in 0..n {
            for j in 0..n {
                sq[[i, j]] = (sq[[i, j]] - lse[i]).exp() * scale;
                sp[[i, j]] = if i == j {
                    F::zero()
                } else {
                    (sp[[i, j]] - lse[i]).exp() * scale
                };
            }
            sq[[i, i]] = sq[[i, i]] - scale;
        }
        let mut da = Array2::zeros((n, layout.h));
        general_mat_mul(F::one(), &sq, &q, F::one(), &mut da);
        general_mat_mul(F::one(), &sp, &a, F::one(), &mut da);
        general_mat_mul(F::one(), &sp.t(), &a, F::one(), &mut da);
        let mut dq = Array2::zeros((n, layout.h));
        general_mat_mul(F::one(), &sq.t(), &a, F::zero(), &mut dq);

        let base = g * layout.group_stride;
        for i in 0..n {
            let off = base + i * layout.row_stride;
            for k in 0..layout.h {
                grad_p[off + k] = grad_p[off + k] + da[[i, k]];
                grad_q[off + k] = grad_q[off + k] + dq[[i, k]];
            }
        }
    }
}
