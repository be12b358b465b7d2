//! Neural network layers with explicit forward and backward passes.
//!
//! Everything is batched, laid out NCHW, and generic over the float
//! type: training runs in `f32`, gradient checking in `f64`. Convolution
//! uses 'same' padding via im2col plus a matrix product; both pooling
//! ops use ceil-mode windows, so no input size is ever rounded away to
//! nothing. Partial average-pool windows divide by their true size.

use ndarray::{concatenate, Array1, Array2, Array3, Array4, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Float type the layers work in.
pub trait Num:
    num_traits::Float
    + ndarray::LinalgScalar
    + rand::distr::uniform::SampleUniform
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Num for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Num for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// Output length of a ceil-mode window op.
fn ceil_out(len: usize, window: usize) -> usize {
    len.div_ceil(window)
}

/// Leading padding for 'same' convolution.
fn pad_begin(len: usize, kernel: usize, stride: usize) -> usize {
    let out = ceil_out(len, stride);
    let total = ((out - 1) * stride + kernel).saturating_sub(len);
    total / 2
}

// ---------------------------------------------------------------------------
// Pooling

/// Ceil-mode average pooling; edge windows divide by their actual size.
pub fn avg_pool_forward<T: Num>(x: &Array4<T>, k: usize) -> Array4<T> {
    let (b, c, h, w) = x.dim();
    let (oh, ow) = (ceil_out(h, k), ceil_out(w, k));
    let mut y = Array4::zeros((b, c, oh, ow));
    for bi in 0..b {
        for ci in 0..c {
            for i in 0..oh {
                for j in 0..ow {
                    let (h0, h1) = (i * k, (i * k + k).min(h));
                    let (w0, w1) = (j * k, (j * k + k).min(w));
                    let mut sum = T::zero();
                    for ii in h0..h1 {
                        for jj in w0..w1 {
                            sum = sum + x[[bi, ci, ii, jj]];
                        }
                    }
                    let count = T::from_f64(((h1 - h0) * (w1 - w0)) as f64);
                    y[[bi, ci, i, j]] = sum / count;
                }
            }
        }
    }
    y
}

pub fn avg_pool_backward<T: Num>(dy: &Array4<T>, in_h: usize, in_w: usize, k: usize) -> Array4<T> {
    let (b, c, oh, ow) = dy.dim();
    let mut dx = Array4::zeros((b, c, in_h, in_w));
    for bi in 0..b {
        for ci in 0..c {
            for i in 0..oh {
                for j in 0..ow {
                    let (h0, h1) = (i * k, (i * k + k).min(in_h));
                    let (w0, w1) = (j * k, (j * k + k).min(in_w));
                    let count = T::from_f64(((h1 - h0) * (w1 - w0)) as f64);
                    let g = dy[[bi, ci, i, j]] / count;
                    for ii in h0..h1 {
                        for jj in w0..w1 {
                            dx[[bi, ci, ii, jj]] = dx[[bi, ci, ii, jj]] + g;
                        }
                    }
                }
            }
        }
    }
    dx
}

/// Argmax positions of a ceil-mode max pool, for the backward scatter.
pub struct MaxPoolCache {
    in_h: usize,
    in_w: usize,
    /// Flattened input index (h * in_w + w) of each output's maximum.
    argmax: Array4<usize>,
}

pub fn max_pool_forward<T: Num>(x: &Array4<T>, k: usize) -> (Array4<T>, MaxPoolCache) {
    let (b, c, h, w) = x.dim();
    let (oh, ow) = (ceil_out(h, k), ceil_out(w, k));
    let mut y = Array4::zeros((b, c, oh, ow));
    let mut argmax = Array4::zeros((b, c, oh, ow));
    if let (Some(xs), Some(ys), Some(args)) =
        (x.as_slice(), y.as_slice_mut(), argmax.as_slice_mut())
    {
        for bi in 0..b {
            for ci in 0..c {
                let base = (bi * c + ci) * h * w;
                let out_base = (bi * c + ci) * oh * ow;
                for i in 0..oh {
                    for j in 0..ow {
                        let (h0, h1) = (i * k, (i * k + k).min(h));
                        let (w0, w1) = (j * k, (j * k + k).min(w));
                        let mut best = xs[base + h0 * w + w0];
                        let mut best_idx = h0 * w + w0;
                        for ii in h0..h1 {
                            let row = base + ii * w;
                            for (jj, &v) in xs[row + w0..row + w1].iter().enumerate() {
                                if v > best {
                                    best = v;
                                    best_idx = ii * w + w0 + jj;
                                }
                            }
                        }
                        ys[out_base + i * ow + j] = best;
                        args[out_base + i * ow + j] = best_idx;
                    }
                }
            }
        }
        return (
            y,
            MaxPoolCache {
                in_h: h,
                in_w: w,
                argmax,
            },
        );
    }
    for bi in 0..b {
        for ci in 0..c {
            for i in 0..oh {
                for j in 0..ow {
                    let (h0, h1) = (i * k, (i * k + k).min(h));
                    let (w0, w1) = (j * k, (j * k + k).min(w));
                    let mut best = x[[bi, ci, h0, w0]];
                    let mut best_idx = h0 * w + w0;
                    for ii in h0..h1 {
                        for jj in w0..w1 {
                            let v = x[[bi, ci, ii, jj]];
                            if v > best {
                                best = v;
                                best_idx = ii * w + jj;
                            }
                        }
                    }
                    y[[bi, ci, i, j]] = best;
                    argmax[[bi, ci, i, j]] = best_idx;
                }
            }
        }
    }
    (
        y,
        MaxPoolCache {
            in_h: h,
            in_w: w,
            argmax,
        },
    )
}

pub fn max_pool_backward<T: Num>(dy: &Array4<T>, cache: &MaxPoolCache) -> Array4<T> {
    let (b, c, oh, ow) = dy.dim();
    let mut dx = Array4::zeros((b, c, cache.in_h, cache.in_w));
    for bi in 0..b {
        for ci in 0..c {
            for i in 0..oh {
                for j in 0..ow {
                    let idx = cache.argmax[[bi, ci, i, j]];
                    let (ii, jj) = (idx / cache.in_w, idx % cache.in_w);
                    dx[[bi, ci, ii, jj]] = dx[[bi, ci, ii, jj]] + dy[[bi, ci, i, j]];
                }
            }
        }
    }
    dx
}

// ---------------------------------------------------------------------------
// ReLU

pub fn relu_forward<T: Num, D: ndarray::Dimension>(
    x: &ndarray::Array<T, D>,
) -> ndarray::Array<T, D> {
    x.mapv(|v| if v > T::zero() { v } else { T::zero() })
}

pub fn relu_backward<T: Num, D: ndarray::Dimension>(
    dy: &ndarray::Array<T, D>,
    x: &ndarray::Array<T, D>,
) -> ndarray::Array<T, D> {
    let mut dx = dy.clone();
    dx.zip_mut_with(x, |g, &v| {
        if v <= T::zero() {
            *g = T::zero();
        }
    });
    dx
}

// ---------------------------------------------------------------------------
// Convolution

/// 2D convolution with 'same' padding: output spatial size is
/// `ceil(input / stride)`.
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    /// (out_channels, in_channels, k, k)
    pub w: Array4<T>,
    pub b: Array1<T>,
    pub stride: usize,
}

pub struct Conv2dCache<T> {
    /// (batch, in_c * k * k, out_h * out_w)
    cols: Array3<T>,
    in_h: usize,
    in_w: usize,
    out_h: usize,
    out_w: usize,
}

#[derive(Debug, Clone)]
pub struct Conv2dGrad<T> {
    pub dw: Array4<T>,
    pub db: Array1<T>,
}

impl<T: Num> Conv2d<T> {
    pub fn he_init(in_c: usize, out_c: usize, k: usize, stride: usize, rng: &mut impl Rng) -> Self {
        let fan_in = (in_c * k * k) as f64;
        let limit = T::from_f64((6.0 / fan_in).sqrt());
        let w = Array4::from_shape_fn((out_c, in_c, k, k), |_| {
            rng.random_range(-limit..limit)
        });
        Conv2d {
            w,
            b: Array1::zeros(out_c),
            stride,
        }
    }

    pub fn zeros(in_c: usize, out_c: usize, k: usize, stride: usize) -> Self {
        Conv2d {
            w: Array4::zeros((out_c, in_c, k, k)),
            b: Array1::zeros(out_c),
            stride,
        }
    }

    fn im2col(&self, x: &Array4<T>) -> Conv2dCache<T> {
        let (batch, in_c, h, w) = x.dim();
        let k = self.w.dim().2;
        let s = self.stride;
        let (oh, ow) = (ceil_out(h, s), ceil_out(w, s));
        let (ph, pw) = (pad_begin(h, k, s), pad_begin(w, k, s));
        let mut cols = Array3::zeros((batch, in_c * k * k, oh * ow));
        // Contiguous fast path: at stride 1 each (row, i) pair copies one
        // run of consecutive input cells, so the inner loop is a slice copy.
        if s == 1 {
            if let (Some(xs), Some(cs)) = (x.as_slice(), cols.as_slice_mut()) {
                for b in 0..batch {
                    for c in 0..in_c {
                        for di in 0..k {
                            for dj in 0..k {
                                let row = (c * k + di) * k + dj;
                                let j0 = pw.saturating_sub(dj);
                                let j1 = (w + pw).saturating_sub(dj).min(ow);
                                for i in 0..oh {
                                    let ii = (i + di) as isize - ph as isize;
                                    if ii < 0 || ii >= h as isize || j1 <= j0 {
                                        continue;
                                    }
                                    let src =
                                        ((b * in_c + c) * h + ii as usize) * w + (j0 + dj - pw);
                                    let dst = (b * in_c * k * k + row) * (oh * ow) + i * ow + j0;
                                    cs[dst..dst + (j1 - j0)]
                                        .copy_from_slice(&xs[src..src + (j1 - j0)]);
                                }
                            }
                        }
                    }
                }
                return Conv2dCache {
                    cols,
                    in_h: h,
                    in_w: w,
                    out_h: oh,
                    out_w: ow,
                };
            }
        }
        for b in 0..batch {
            for c in 0..in_c {
                for di in 0..k {
                    for dj in 0..k {
                        let row = (c * k + di) * k + dj;
                        for i in 0..oh {
                            let ii = (i * s + di) as isize - ph as isize;
                            if ii < 0 || ii >= h as isize {
                                continue;
                            }
                            for j in 0..ow {
                                let jj = (j * s + dj) as isize - pw as isize;
                                if jj < 0 || jj >= w as isize {
                                    continue;
                                }
                                cols[[b, row, i * ow + j]] = x[[b, c, ii as usize, jj as usize]];
                            }
                        }
                    }
                }
            }
        }
        Conv2dCache {
            cols,
            in_h: h,
            in_w: w,
            out_h: oh,
            out_w: ow,
        }
    }

    pub fn forward(&self, x: &Array4<T>) -> (Array4<T>, Conv2dCache<T>) {
        let cache = self.im2col(x);
        let (batch, _, _, _) = x.dim();
        let (out_c, in_c, k, _) = self.w.dim();
        let w_mat = self
            .w
            .view()
            .into_shape_with_order((out_c, in_c * k * k))
            .expect("conv weights are contiguous");
        let plane = cache.out_h * cache.out_w;
        let mut y = Array4::zeros((batch, out_c, cache.out_h, cache.out_w));
        let ys = y.as_slice_mut().expect("freshly allocated output is contiguous");
        for b in 0..batch {
            let prod = w_mat.dot(&cache.cols.index_axis(Axis(0), b));
            let ps = prod.as_slice().expect("matmul result is contiguous");
            for oc in 0..out_c {
                let bias = self.b[oc];
                let dst = (b * out_c + oc) * plane;
                for (yv, &pv) in ys[dst..dst + plane].iter_mut().zip(&ps[oc * plane..(oc + 1) * plane]) {
                    *yv = pv + bias;
                }
            }
        }
        (y, cache)
    }

    /// Returns the input gradient and the parameter gradients.
    pub fn backward(&self, dy: &Array4<T>, cache: &Conv2dCache<T>) -> (Array4<T>, Conv2dGrad<T>) {
        let (batch, out_c, oh, ow) = dy.dim();
        let (_, in_c, k, _) = self.w.dim();
        let s = self.stride;
        let w_mat = self
            .w
            .view()
            .into_shape_with_order((out_c, in_c * k * k))
            .expect("conv weights are contiguous");
        let mut dw_mat = Array2::<T>::zeros((out_c, in_c * k * k));
        let mut db = Array1::<T>::zeros(out_c);
        let mut dx = Array4::zeros((batch, in_c, cache.in_h, cache.in_w));
        let (ph, pw) = (
            pad_begin(cache.in_h, k, s),
            pad_begin(cache.in_w, k, s),
        );
        let plane = oh * ow;
        let dys = dy.as_slice();
        let dxs_ok = dx.as_slice_mut().is_some();
        for b in 0..batch {
            let mut dy_mat = Array2::zeros((out_c, plane));
            match (dys, dy_mat.as_slice_mut()) {
                (Some(src), Some(dst)) => {
                    for oc in 0..out_c {
                        let from = (b * out_c + oc) * plane;
                        dst[oc * plane..(oc + 1) * plane]
                            .copy_from_slice(&src[from..from + plane]);
                        let mut acc = db[oc];
                        for &g in &src[from..from + plane] {
                            acc = acc + g;
                        }
                        db[oc] = acc;
                    }
                }
                _ => {
                    for oc in 0..out_c {
                        for p in 0..plane {
                            let g = dy[[b, oc, p / ow, p % ow]];
                            dy_mat[[oc, p]] = g;
                            db[oc] = db[oc] + g;
                        }
                    }
                }
            }
            let cols_b = cache.cols.index_axis(Axis(0), b);
            dw_mat.zip_mut_with(&dy_mat.dot(&cols_b.t()), |a, &g| *a = *a + g);
            let dcols = w_mat.t().dot(&dy_mat);
            // col2im: scatter-add each column entry back to its source. At
            // stride 1 each (row, i) pair adds one contiguous run.
            if s == 1 && dxs_ok {
                let dxs = dx.as_slice_mut().expect("checked above");
                let dcs = dcols.as_slice().expect("matmul result is contiguous");
                for c in 0..in_c {
                    for di in 0..k {
                        for dj in 0..k {
                            let row = (c * k + di) * k + dj;
                            let j0 = pw.saturating_sub(dj);
                            let j1 = (cache.in_w + pw).saturating_sub(dj).min(ow);
                            for i in 0..oh {
                                let ii = (i + di) as isize - ph as isize;
                                if ii < 0 || ii >= cache.in_h as isize || j1 <= j0 {
                                    continue;
                                }
                                let dst = ((b * in_c + c) * cache.in_h + ii as usize)
                                    * cache.in_w
                                    + (j0 + dj - pw);
                                let from = row * plane + i * ow + j0;
                                for (xv, &gv) in dxs[dst..dst + (j1 - j0)]
                                    .iter_mut()
                                    .zip(&dcs[from..from + (j1 - j0)])
                                {
                                    *xv = *xv + gv;
                                }
                            }
                        }
                    }
                }
            } else {
                for c in 0..in_c {
                    for di in 0..k {
                        for dj in 0..k {
                            let row = (c * k + di) * k + dj;
                            for i in 0..oh {
                                let ii = (i * s + di) as isize - ph as isize;
                                if ii < 0 || ii >= cache.in_h as isize {
                                    continue;
                                }
                                for j in 0..ow {
                                    let jj = (j * s + dj) as isize - pw as isize;
                                    if jj < 0 || jj >= cache.in_w as isize {
                                        continue;
                                    }
                                    let (ii, jj) = (ii as usize, jj as usize);
                                    dx[[b, c, ii, jj]] =
                                        dx[[b, c, ii, jj]] + dcols[[row, i * ow + j]];
                                }
                            }
                        }
                    }
                }
            }
        }
        let dw = dw_mat
            .into_shape_with_order((out_c, in_c, k, k))
            .expect("gradient shape matches weights");
        (dx, Conv2dGrad { dw, db })
    }
}

// ---------------------------------------------------------------------------
// Dense

#[derive(Debug, Clone)]
pub struct Dense<T> {
    /// (out_features, in_features)
    pub w: Array2<T>,
    pub b: Array1<T>,
}

#[derive(Debug, Clone)]
pub struct DenseGrad<T> {
    pub dw: Array2<T>,
    pub db: Array1<T>,
}

impl<T: Num> Dense<T> {
    pub fn he_init(in_f: usize, out_f: usize, rng: &mut impl Rng) -> Self {
        let limit = T::from_f64((6.0 / in_f as f64).sqrt());
        let w = Array2::from_shape_fn((out_f, in_f), |_| rng.random_range(-limit..limit));
        Dense {
            w,
            b: Array1::zeros(out_f),
        }
    }

    pub fn zeros(in_f: usize, out_f: usize) -> Self {
        Dense {
            w: Array2::zeros((out_f, in_f)),
            b: Array1::zeros(out_f),
        }
    }

    pub fn forward(&self, x: &Array2<T>) -> Array2<T> {
        x.dot(&self.w.t()) + &self.b
    }

    pub fn backward(&self, dy: &Array2<T>, x: &Array2<T>) -> (Array2<T>, DenseGrad<T>) {
        let dx = dy.dot(&self.w);
        let dw = dy.t().dot(x);
        let db = dy.sum_axis(Axis(0));
        (dx, DenseGrad { dw, db })
    }
}

// ---------------------------------------------------------------------------
// Huber loss

/// Mean Huber loss and its gradient with respect to the predictions.
pub fn huber_loss<T: Num>(pred: &Array1<T>, target: &Array1<T>, delta: T) -> (T, Array1<T>) {
    assert_eq!(pred.len(), target.len());
    let n = T::from_f64(pred.len() as f64);
    let mut loss = T::zero();
    let mut grad = Array1::zeros(pred.len());
    for i in 0..pred.len() {
        let e = pred[i] - target[i];
        if e.abs() <= delta {
            loss = loss + T::from_f64(0.5) * e * e;
            grad[i] = e / n;
        } else {
            loss = loss + delta * (e.abs() - T::from_f64(0.5) * delta);
            grad[i] = delta * e.signum() / n;
        }
    }
    (loss / n, grad)
}

// ---------------------------------------------------------------------------
// The two-branch Q-network

/// One convolution layer's shape in a branch stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub kernels: usize,
    pub kernel_size: usize,
    pub stride: usize,
}

/// Max-pool width between consecutive convolutions in a branch.
pub const POOL_BETWEEN: usize = 2;

/// Number of action values the network emits.
pub const ACTION_COUNT: usize = 5;

/// Shape of the Q-network: a global branch (average-pooled then
/// convolved), a local branch (convolved), and fully connected layers
/// on the concatenation of both flattened branches plus the battery
/// fraction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub global_channels: usize,
    pub global_size: usize,
    pub local_channels: usize,
    pub local_size: usize,
    pub global_pool_kernel: usize,
    pub global_conv: Vec<ConvSpec>,
    pub local_conv: Vec<ConvSpec>,
    pub fc_sizes: Vec<usize>,
}

impl NetworkSpec {
    /// Default architecture for an `M x M` field with an `N x N` FOV:
    /// 6x6 average pool on the global map, then per branch two
    /// convolutions of 16 and 32 3x3 kernels with a 2x2 max pool
    /// between, and fully connected sizes (256, 128, 5).
    pub fn for_field(grid_size: usize, fov_size: usize) -> Self {
        let stack = vec![
            ConvSpec {
                kernels: 16,
                kernel_size: 3,
                stride: 1,
            },
            ConvSpec {
                kernels: 32,
                kernel_size: 3,
                stride: 1,
            },
        ];
        NetworkSpec {
            global_channels: 4,
            global_size: 2 * grid_size - 1,
            local_channels: 4,
            local_size: fov_size,
            global_pool_kernel: 6,
            global_conv: stack.clone(),
            local_conv: stack,
            fc_sizes: vec![256, 128, ACTION_COUNT],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fc_sizes.last() != Some(&ACTION_COUNT) {
            return Err(Error::Config(format!(
                "fc_sizes must end in {ACTION_COUNT} action values"
            )));
        }
        if self.global_pool_kernel < 1 {
            return Err(Error::Config("global_pool_kernel must be >= 1".into()));
        }
        if self.global_size < 1 || self.local_size < 1 {
            return Err(Error::Config("input sizes must be >= 1".into()));
        }
        for conv in self.global_conv.iter().chain(&self.local_conv) {
            if conv.kernels < 1 || conv.kernel_size < 1 || conv.stride < 1 {
                return Err(Error::Config(
                    "conv kernels, kernel_size and stride must be >= 1".into(),
                ));
            }
        }
        Ok(())
    }

    fn branch_flat(channels: usize, mut size: usize, convs: &[ConvSpec]) -> usize {
        let mut ch = channels;
        for (i, conv) in convs.iter().enumerate() {
            size = ceil_out(size, conv.stride);
            ch = conv.kernels;
            if i + 1 < convs.len() {
                size = ceil_out(size, POOL_BETWEEN);
            }
        }
        ch * size * size
    }

    pub fn global_flat(&self) -> usize {
        let pooled = ceil_out(self.global_size, self.global_pool_kernel);
        Self::branch_flat(self.global_channels, pooled, &self.global_conv)
    }

    pub fn local_flat(&self) -> usize {
        Self::branch_flat(self.local_channels, self.local_size, &self.local_conv)
    }

    /// Width of the concatenated feature vector entering the fc stack.
    pub fn concat_width(&self) -> usize {
        self.global_flat() + self.local_flat() + 1
    }
}

#[derive(Debug, Clone)]
pub struct QNetwork<T> {
    spec: NetworkSpec,
    pub global_convs: Vec<Conv2d<T>>,
    pub local_convs: Vec<Conv2d<T>>,
    pub fcs: Vec<Dense<T>>,
}

/// Gradients for every parameter tensor, in [`QNetwork::tensors`] order.
#[derive(Debug, Clone)]
pub struct Grads<T> {
    pub global_convs: Vec<Conv2dGrad<T>>,
    pub local_convs: Vec<Conv2dGrad<T>>,
    pub fcs: Vec<DenseGrad<T>>,
}

struct BranchCache<T> {
    conv_inputs_dims: Vec<(usize, usize)>,
    conv_caches: Vec<Conv2dCache<T>>,
    pre_relu: Vec<Array4<T>>,
    pool_caches: Vec<Option<MaxPoolCache>>,
    out_dim: (usize, usize, usize),
}

/// Forward activations needed by [`QNetwork::backward`].
pub struct ForwardCache<T> {
    global: BranchCache<T>,
    local: BranchCache<T>,
    fc_inputs: Vec<Array2<T>>,
    fc_pre_relu: Vec<Array2<T>>,
}

fn init_convs<T: Num, R: Rng>(channels: usize, convs: &[ConvSpec], rng: &mut R) -> Vec<Conv2d<T>> {
    let mut ch = channels;
    let mut out = Vec::new();
    for c in convs {
        out.push(Conv2d::he_init(ch, c.kernels, c.kernel_size, c.stride, rng));
        ch = c.kernels;
    }
    out
}

impl<T: Num> QNetwork<T> {
    pub fn init(spec: NetworkSpec, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        let global_convs = init_convs(spec.global_channels, &spec.global_conv, rng);
        let local_convs = init_convs(spec.local_channels, &spec.local_conv, rng);
        let mut fcs = Vec::new();
        let mut width = spec.concat_width();
        for &out in &spec.fc_sizes {
            fcs.push(Dense::he_init(width, out, rng));
            width = out;
        }
        Ok(QNetwork {
            spec,
            global_convs,
            local_convs,
            fcs,
        })
    }

    pub fn zeros(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let build = |channels: usize, convs: &[ConvSpec]| {
            let mut ch = channels;
            let mut out = Vec::new();
            for c in convs {
                out.push(Conv2d::zeros(ch, c.kernels, c.kernel_size, c.stride));
                ch = c.kernels;
            }
            out
        };
        let global_convs = build(spec.global_channels, &spec.global_conv);
        let local_convs = build(spec.local_channels, &spec.local_conv);
        let mut fcs = Vec::new();
        let mut width = spec.concat_width();
        for &out in &spec.fc_sizes {
            fcs.push(Dense::zeros(width, out));
            width = out;
        }
        Ok(QNetwork {
            spec,
            global_convs,
            local_convs,
            fcs,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    fn check_input(&self, global: &Array4<T>, local: &Array4<T>, battery: &Array1<T>) -> Result<()> {
        let (bg, cg, hg, wg) = global.dim();
        let (bl, cl, hl, wl) = local.dim();
        let s = &self.spec;
        if cg != s.global_channels || hg != s.global_size || wg != s.global_size {
            return Err(Error::Contract(format!(
                "global input {cg}x{hg}x{wg} does not match spec {}x{}x{1}",
                s.global_channels, s.global_size
            )));
        }
        if cl != s.local_channels || hl != s.local_size || wl != s.local_size {
            return Err(Error::Contract(format!(
                "local input {cl}x{hl}x{wl} does not match spec {}x{}x{1}",
                s.local_channels, s.local_size
            )));
        }
        if bg != bl || bg != battery.len() {
            return Err(Error::Contract(format!(
                "batch sizes disagree: global {bg}, local {bl}, battery {}",
                battery.len()
            )));
        }
        Ok(())
    }

    fn branch_forward(convs: &[Conv2d<T>], mut x: Array4<T>) -> (Array2<T>, BranchCache<T>) {
        let mut cache = BranchCache {
            conv_inputs_dims: Vec::new(),
            conv_caches: Vec::new(),
            pre_relu: Vec::new(),
            pool_caches: Vec::new(),
            out_dim: (0, 0, 0),
        };
        let count = convs.len();
        for (i, conv) in convs.iter().enumerate() {
            cache.conv_inputs_dims.push((x.dim().2, x.dim().3));
            let (pre, conv_cache) = conv.forward(&x);
            cache.conv_caches.push(conv_cache);
            let post = relu_forward(&pre);
            cache.pre_relu.push(pre);
            if i + 1 < count {
                let (pooled, pc) = max_pool_forward(&post, POOL_BETWEEN);
                cache.pool_caches.push(Some(pc));
                x = pooled;
            } else {
                cache.pool_caches.push(None);
                x = post;
            }
        }
        let (b, c, h, w) = x.dim();
        cache.out_dim = (c, h, w);
        let flat = x
            .as_standard_layout()
            .to_owned()
            .into_shape_with_order((b, c * h * w))
            .expect("branch output is contiguous");
        (flat, cache)
    }

    fn branch_backward(
        convs: &[Conv2d<T>],
        dflat: &Array2<T>,
        cache: &BranchCache<T>,
    ) -> (Array4<T>, Vec<Conv2dGrad<T>>) {
        let b = dflat.dim().0;
        let (c, h, w) = cache.out_dim;
        let mut dx = dflat
            .to_owned()
            .into_shape_with_order((b, c, h, w))
            .expect("flat gradient matches branch output");
        let mut grads = vec![None; convs.len()];
        for i in (0..convs.len()).rev() {
            if let Some(pc) = &cache.pool_caches[i] {
                dx = max_pool_backward(&dx, pc);
            }
            let dpre = relu_backward(&dx, &cache.pre_relu[i]);
            let (dinput, grad) = convs[i].backward(&dpre, &cache.conv_caches[i]);
            grads[i] = Some(grad);
            dx = dinput;
        }
        (dx, grads.into_iter().map(|g| g.unwrap()).collect())
    }

    /// Q-values for a batch, keeping activations for [`Self::backward`].
    pub fn forward_cached(
        &self,
        global: &Array4<T>,
        local: &Array4<T>,
        battery: &Array1<T>,
    ) -> Result<(Array2<T>, ForwardCache<T>)> {
        self.check_input(global, local, battery)?;
        let pooled = avg_pool_forward(global, self.spec.global_pool_kernel);
        let (gflat, gcache) = Self::branch_forward(&self.global_convs, pooled);
        let (lflat, lcache) = Self::branch_forward(&self.local_convs, local.clone());
        let b = battery.len();
        let batt_col = battery.view().into_shape_with_order((b, 1)).expect("1D");
        let mut z = concatenate(Axis(1), &[gflat.view(), lflat.view(), batt_col])
            .expect("branch widths agree");

        let mut fc_inputs = Vec::new();
        let mut fc_pre_relu = Vec::new();
        let count = self.fcs.len();
        for (i, fc) in self.fcs.iter().enumerate() {
            fc_inputs.push(z.clone());
            let pre = fc.forward(&z);
            if i + 1 < count {
                z = relu_forward(&pre);
                fc_pre_relu.push(pre);
            } else {
                z = pre;
            }
        }
        Ok((
            z,
            ForwardCache {
                global: gcache,
                local: lcache,
                fc_inputs,
                fc_pre_relu,
            },
        ))
    }

    /// Q-values for a batch.
    pub fn forward(
        &self,
        global: &Array4<T>,
        local: &Array4<T>,
        battery: &Array1<T>,
    ) -> Result<Array2<T>> {
        self.forward_cached(global, local, battery).map(|(y, _)| y)
    }

    /// Parameter gradients of a scalar loss with output gradient `dout`.
    pub fn backward(&self, dout: &Array2<T>, cache: &ForwardCache<T>) -> Grads<T> {
        let mut dz = dout.clone();
        let mut fc_grads = vec![None; self.fcs.len()];
        for i in (0..self.fcs.len()).rev() {
            if i + 1 < self.fcs.len() {
                dz = relu_backward(&dz, &cache.fc_pre_relu[i]);
            }
            let (dx, grad) = self.fcs[i].backward(&dz, &cache.fc_inputs[i]);
            fc_grads[i] = Some(grad);
            dz = dx;
        }
        let gf = self.spec.global_flat();
        let lf = self.spec.local_flat();
        let dglobal_flat = dz.slice(ndarray::s![.., 0..gf]).to_owned();
        let dlocal_flat = dz.slice(ndarray::s![.., gf..gf + lf]).to_owned();
        let (_, global_grads) =
            Self::branch_backward(&self.global_convs, &dglobal_flat, &cache.global);
        let (_, local_grads) = Self::branch_backward(&self.local_convs, &dlocal_flat, &cache.local);
        Grads {
            global_convs: global_grads,
            local_convs: local_grads,
            fcs: fc_grads.into_iter().map(|g| g.unwrap()).collect(),
        }
    }

    /// All parameters, flattened in a stable order (global convs, local
    /// convs, fc layers; weights before biases).
    pub fn flat_params(&self) -> Vec<T> {
        let mut out = Vec::new();
        for conv in self.global_convs.iter().chain(&self.local_convs) {
            out.extend(conv.w.iter().copied());
            out.extend(conv.b.iter().copied());
        }
        for fc in &self.fcs {
            out.extend(fc.w.iter().copied());
            out.extend(fc.b.iter().copied());
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[T]) -> Result<()> {
        let expected = self.flat_params().len();
        if params.len() != expected {
            return Err(Error::Contract(format!(
                "expected {expected} parameters, got {}",
                params.len()
            )));
        }
        let mut it = params.iter().copied();
        for conv in self.global_convs.iter_mut().chain(&mut self.local_convs) {
            for v in conv.w.iter_mut() {
                *v = it.next().unwrap();
            }
            for v in conv.b.iter_mut() {
                *v = it.next().unwrap();
            }
        }
        for fc in &mut self.fcs {
            for v in fc.w.iter_mut() {
                *v = it.next().unwrap();
            }
            for v in fc.b.iter_mut() {
                *v = it.next().unwrap();
            }
        }
        Ok(())
    }
}

impl<T: Num> Grads<T> {
    /// Flattened gradients, matching [`QNetwork::flat_params`] order.
    pub fn flat(&self) -> Vec<T> {
        let mut out = Vec::new();
        for g in self.global_convs.iter().chain(&self.local_convs) {
            out.extend(g.dw.iter().copied());
            out.extend(g.db.iter().copied());
        }
        for g in &self.fcs {
            out.extend(g.dw.iter().copied());
            out.extend(g.db.iter().copied());
        }
        out
    }

    pub fn l2_norm(&self) -> T {
        self.flat()
            .iter()
            .fold(T::zero(), |acc, &g| acc + g * g)
            .sqrt()
    }

    pub fn scale(&mut self, factor: T) {
        for g in self.global_convs.iter_mut().chain(&mut self.local_convs) {
            g.dw.mapv_inplace(|v| v * factor);
            g.db.mapv_inplace(|v| v * factor);
        }
        for g in &mut self.fcs {
            g.dw.mapv_inplace(|v| v * factor);
            g.db.mapv_inplace(|v| v * factor);
        }
    }
}

// ---------------------------------------------------------------------------
// Optimizer

/// Stochastic gradient descent with classical momentum and optional
/// global-norm gradient clipping.
pub struct SgdMomentum<T> {
    pub learning_rate: T,
    pub momentum: T,
    pub clip_norm: Option<T>,
    velocity: Option<Vec<T>>,
}

impl<T: Num> SgdMomentum<T> {
    pub fn new(learning_rate: T, momentum: T, clip_norm: Option<T>) -> Self {
        SgdMomentum {
            learning_rate,
            momentum,
            clip_norm,
            velocity: None,
        }
    }

    pub fn step(&mut self, net: &mut QNetwork<T>, grads: &Grads<T>) {
        let mut flat = grads.flat();
        if let Some(max) = self.clip_norm {
            let norm = flat
                .iter()
                .fold(T::zero(), |acc, &g| acc + g * g)
                .sqrt();
            if norm > max {
                let s = max / norm;
                for g in &mut flat {
                    *g = *g * s;
                }
            }
        }
        let velocity = self
            .velocity
            .get_or_insert_with(|| vec![T::zero(); flat.len()]);
        let mut params = net.flat_params();
        for i in 0..flat.len() {
            velocity[i] = self.momentum * velocity[i] + flat[i];
            params[i] = params[i] - self.learning_rate * velocity[i];
        }
        net.set_flat_params(&params).expect("same shape");
    }
}

// ---------------------------------------------------------------------------
// Gradient checking

/// Mean of squared outputs and its gradient; the scalar objective used
/// for finite-difference checks.
pub fn mean_square_output<T: Num>(out: &Array2<T>) -> (T, Array2<T>) {
    let n = T::from_f64(out.len() as f64);
    let loss = out.iter().fold(T::zero(), |acc, &v| acc + v * v) / n;
    let grad = out.mapv(|v| T::from_f64(2.0) * v / n);
    (loss, grad)
}

/// Largest relative error between analytic and central-difference
/// gradients of the mean-squared-output objective, over every
/// parameter.
pub fn max_grad_rel_error(
    net: &mut QNetwork<f64>,
    global: &Array4<f64>,
    local: &Array4<f64>,
    battery: &Array1<f64>,
    eps: f64,
) -> Result<f64> {
    let (out, cache) = net.forward_cached(global, local, battery)?;
    let (_, dout) = mean_square_output(&out);
    let analytic = net.backward(&dout, &cache).flat();

    let base = net.flat_params();
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        let mut params = base.clone();
        params[i] = base[i] + eps;
        net.set_flat_params(&params)?;
        let (plus, _) = mean_square_output(&net.forward(global, local, battery)?);
        params[i] = base[i] - eps;
        net.set_flat_params(&params)?;
        let (minus, _) = mean_square_output(&net.forward(global, local, battery)?);
        let numeric = (plus - minus) / (2.0 * eps);
        let denom = (numeric.abs() + analytic[i].abs()).max(1e-8);
        worst = worst.max((numeric - analytic[i]).abs() / denom);
    }
    net.set_flat_params(&base)?;
    Ok(worst)
}
