//! 2-D convolution and transposed convolution via im2col + gemm.
//!
//! Inputs are `[N, C, H, W]` batches; a rank-3 `[C, H, W]` input is treated as
//! a batch of one and the output keeps rank 3. Padding is zero padding.

use super::linalg::{gemm_nn, gemm_nt, gemm_tn};
use super::tensor::{expect_axis, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Geometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub out_height: usize,
    pub out_width: usize,
}

impl Geometry {
    /// Geometry of a forward convolution over a `channels × height × width` map.
    pub fn conv(
        op: &'static str,
        channels: usize,
        height: usize,
        width: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        if kernel.is_multiple_of(2) {
            return Err(Error::dim(op, format!("kernel size {kernel} must be odd")));
        }
        if stride == 0 {
            return Err(Error::param(op, "stride must be positive"));
        }
        let out = |axis: &str, len: usize| -> Result<usize> {
            let padded = len + 2 * padding;
            if padded < kernel || !(padded - kernel).is_multiple_of(stride) {
                return Err(Error::dim(
                    op,
                    format!("axis {axis}: ({len} + 2·{padding} − {kernel}) / {stride} is not integral"),
                ));
            }
            Ok((padded - kernel) / stride + 1)
        };
        Ok(Geometry {
            channels,
            height,
            width,
            kernel,
            stride,
            padding,
            out_height: out("H", height)?,
            out_width: out("W", width)?,
        })
    }

    fn cols_rows(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    fn cols_cols(&self) -> usize {
        self.out_height * self.out_width
    }
}

/// Output columns `[lo, hi)` whose input column `ox·s + kj − p` is in range.
#[inline]
fn valid_span(kj: usize, g: &Geometry) -> (usize, usize) {
    let (s, p, w) = (g.stride as isize, g.padding as isize, g.width as isize);
    let off = kj as isize - p;
    // smallest ox with ox·s + off ≥ 0, and one past the largest with ox·s + off < w
    let lo = if off >= 0 { 0 } else { ((-off) + s - 1) / s };
    let hi = if w - off <= 0 { 0 } else { (w - off + s - 1) / s };
    let hi = hi.min(g.out_width as isize);
    (lo.max(0) as usize, hi.max(lo.max(0)) as usize)
}

/// Unfold patches of `x` (`channels × height × width`) into `cols`
/// (`channels·k·k × out_h·out_w`).
pub fn im2col<S: Scalar>(x: &[S], g: &Geometry, cols: &mut [S]) {
    let (k, s, p) = (g.kernel, g.stride, g.padding as isize);
    let (ho, wo) = (g.out_height, g.out_width);
    for c in 0..g.channels {
        let plane = &x[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ki in 0..k {
            for kj in 0..k {
                let row = (c * k + ki) * k + kj;
                let dst = &mut cols[row * ho * wo..(row + 1) * ho * wo];
                let (lo, hi) = valid_span(kj, g);
                let off = kj as isize - p;
                for oy in 0..ho {
                    let iy = (oy * s + ki) as isize - p;
                    let line = &mut dst[oy * wo..(oy + 1) * wo];
                    if iy < 0 || iy >= g.height as isize || lo >= hi {
                        line.fill(S::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                    line[..lo].fill(S::zero());
                    line[hi..].fill(S::zero());
                    let start = (lo as isize * s as isize + off) as usize;
                    if s == 1 {
                        line[lo..hi].copy_from_slice(&src[start..start + (hi - lo)]);
                    } else {
                        for (j, v) in line[lo..hi].iter_mut().enumerate() {
                            *v = src[start + j * s];
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add `cols` back into `x`.
pub fn col2im<S: Scalar>(cols: &[S], g: &Geometry, x: &mut [S]) {
    let (k, s, p) = (g.kernel, g.stride, g.padding as isize);
    let (ho, wo) = (g.out_height, g.out_width);
    for c in 0..g.channels {
        let plane = &mut x[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ki in 0..k {
            for kj in 0..k {
                let row = (c * k + ki) * k + kj;
                let src = &cols[row * ho * wo..(row + 1) * ho * wo];
                let (lo, hi) = valid_span(kj, g);
                if lo >= hi {
                    continue;
                }
                let off = kj as isize - p;
                let start = (lo as isize * s as isize + off) as usize;
                for oy in 0..ho {
                    let iy = (oy * s + ki) as isize - p;
                    if iy < 0 || iy >= g.height as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                    let line = &src[oy * wo + lo..oy * wo + hi];
                    if s == 1 {
                        for (d, &v) in dst[start..start + line.len()].iter_mut().zip(line) {
                            *d += v;
                        }
                    } else {
                        for (j, &v) in line.iter().enumerate() {
                            dst[start + j * s] += v;
                        }
                    }
                }
            }
        }
    }
}

/// Splits a rank-3 or rank-4 map into (batch, channels, height, width).
fn batch_dims<S: Scalar>(op: &'static str, t: &Tensor<S>) -> Result<(usize, usize, usize, usize)> {
    match *t.shape() {
        [c, h, w] => Ok((1, c, h, w)),
        [n, c, h, w] => Ok((n, c, h, w)),
        _ => Err(Error::dim(op, format!("expected [N,C,H,W] or [C,H,W], got {:?}", t.shape()))),
    }
}

fn batch_shape(rank: usize, n: usize, c: usize, h: usize, w: usize) -> Vec<usize> {
    if rank == 3 {
        vec![c, h, w]
    } else {
        vec![n, c, h, w]
    }
}

fn kernel_dims<S: Scalar>(op: &'static str, kernels: &Tensor<S>) -> Result<(usize, usize, usize)> {
    match *kernels.shape() {
        [a, b, k1, k2] => {
            expect_axis(op, "kernel width", k1, k2)?;
            Ok((a, b, k1))
        }
        _ => Err(Error::dim(op, format!("kernels must be rank 4, got {:?}", kernels.shape()))),
    }
}

/// Shape bookkeeping for a conv2d call.
#[derive(Clone, Copy, Debug)]
pub struct ConvPlan {
    pub batch: usize,
    pub out_channels: usize,
    pub geometry: Geometry,
    rank: usize,
}

impl ConvPlan {
    pub fn conv2d<S: Scalar>(
        input: &Tensor<S>,
        kernels: &Tensor<S>,
        bias: &Tensor<S>,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        const OP: &str = "conv2d";
        let (n, c, h, w) = batch_dims(OP, input)?;
        let (co, ci, k) = kernel_dims(OP, kernels)?;
        expect_axis(OP, "C_in", ci, c)?;
        expect_axis(OP, "bias", co, bias.numel())?;
        let geometry = Geometry::conv(OP, c, h, w, k, stride, padding)?;
        Ok(ConvPlan { batch: n, out_channels: co, geometry, rank: input.rank() })
    }

    pub fn output_shape(&self) -> Vec<usize> {
        let g = &self.geometry;
        batch_shape(self.rank, self.batch, self.out_channels, g.out_height, g.out_width)
    }
}

pub fn conv2d<S: Scalar>(
    input: &Tensor<S>,
    kernels: &Tensor<S>,
    bias: &Tensor<S>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<S>> {
    let plan = ConvPlan::conv2d(input, kernels, bias, stride, padding)?;
    let g = plan.geometry;
    let (rows, cols_n) = (g.cols_rows(), g.cols_cols());
    let mut out = Tensor::zeros(&plan.output_shape());
    let mut cols = vec![S::zero(); rows * cols_n];
    for i in 0..plan.batch {
        im2col(in_item(input, plan.rank, i), &g, &mut cols);
        let dst = out_item(&mut out, plan.rank, i);
        for (co, chunk) in dst.chunks_mut(cols_n).enumerate() {
            chunk.iter_mut().for_each(|v| *v = bias.data()[co]);
        }
        gemm_nn(plan.out_channels, rows, cols_n, kernels.data(), &cols, S::one(), dst);
    }
    Ok(out)
}

fn out_item<S: Scalar>(out: &mut Tensor<S>, rank: usize, i: usize) -> &mut [S] {
    if rank == 3 {
        out.data_mut()
    } else {
        out.item_mut(i)
    }
}

fn in_item<S: Scalar>(t: &Tensor<S>, rank: usize, i: usize) -> &[S] {
    if rank == 3 {
        t.data()
    } else {
        t.item(i)
    }
}

/// Gradients of conv2d: `(d_input, d_kernels, d_bias)`.
pub fn conv2d_backward<S: Scalar>(
    input: &Tensor<S>,
    kernels: &Tensor<S>,
    grad_out: &Tensor<S>,
    stride: usize,
    padding: usize,
) -> Result<(Tensor<S>, Tensor<S>, Tensor<S>)> {
    let co = kernels.dim(0);
    let bias = Tensor::zeros(&[co]);
    let plan = ConvPlan::conv2d(input, kernels, &bias, stride, padding)?;
    if grad_out.shape() != plan.output_shape().as_slice() {
        return Err(Error::dim(
            "conv2d_backward",
            format!("upstream gradient {:?} does not match output {:?}", grad_out.shape(), plan.output_shape()),
        ));
    }
    let g = plan.geometry;
    let (rows, cols_n) = (g.cols_rows(), g.cols_cols());
    let mut d_input = Tensor::zeros(input.shape());
    let mut d_kernels = Tensor::zeros(kernels.shape());
    let mut d_bias = Tensor::zeros(&[co]);
    let mut cols = vec![S::zero(); rows * cols_n];
    let mut d_cols = vec![S::zero(); rows * cols_n];
    for i in 0..plan.batch {
        let gy = in_item(grad_out, plan.rank, i);
        im2col(in_item(input, plan.rank, i), &g, &mut cols);
        gemm_nt(co, cols_n, rows, gy, &cols, S::one(), d_kernels.data_mut());
        for (c, chunk) in gy.chunks(cols_n).enumerate() {
            d_bias.data_mut()[c] += chunk.iter().copied().sum::<S>();
        }
        gemm_tn(rows, co, cols_n, kernels.data(), gy, S::zero(), &mut d_cols);
        col2im(&d_cols, &g, out_item(&mut d_input, plan.rank, i));
    }
    Ok((d_input, d_kernels, d_bias))
}

/// Shape bookkeeping for a transposed convolution with kernels `[C_in, C_out, k, k]`.
#[derive(Clone, Copy, Debug)]
pub struct TransposePlan {
    pub batch: usize,
    pub in_channels: usize,
    /// Geometry of the adjoint forward convolution (output map → input map).
    pub geometry: Geometry,
    rank: usize,
}

impl TransposePlan {
    pub fn new<S: Scalar>(
        input: &Tensor<S>,
        kernels: &Tensor<S>,
        bias: &Tensor<S>,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        const OP: &str = "conv_transpose2d";
        let (n, c, h, w) = batch_dims(OP, input)?;
        let (ci, co, k) = kernel_dims(OP, kernels)?;
        expect_axis(OP, "C_in", ci, c)?;
        expect_axis(OP, "bias", co, bias.numel())?;
        if k % 2 == 0 {
            return Err(Error::dim(OP, format!("kernel size {k} must be odd")));
        }
        if stride == 0 {
            return Err(Error::param(OP, "stride must be positive"));
        }
        let out = |axis: &str, len: usize| -> Result<usize> {
            let full = (len - 1) * stride + k;
            if full < 2 * padding + 1 {
                return Err(Error::dim(OP, format!("axis {axis}: padding {padding} leaves no output")));
            }
            Ok(full - 2 * padding)
        };
        let (ho, wo) = (out("H", h)?, out("W", w)?);
        let geometry = Geometry::conv(OP, co, ho, wo, k, stride, padding)?;
        debug_assert_eq!((geometry.out_height, geometry.out_width), (h, w));
        Ok(TransposePlan { batch: n, in_channels: c, geometry, rank: input.rank() })
    }

    pub fn output_shape(&self) -> Vec<usize> {
        let g = &self.geometry;
        batch_shape(self.rank, self.batch, g.channels, g.height, g.width)
    }
}

pub fn conv_transpose2d<S: Scalar>(
    input: &Tensor<S>,
    kernels: &Tensor<S>,
    bias: &Tensor<S>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<S>> {
    let plan = TransposePlan::new(input, kernels, bias, stride, padding)?;
    let g = plan.geometry;
    let (rows, cols_n) = (g.cols_rows(), g.cols_cols());
    let plane = g.height * g.width;
    let mut out = Tensor::zeros(&plan.output_shape());
    let mut cols = vec![S::zero(); rows * cols_n];
    for i in 0..plan.batch {
        gemm_tn(rows, plan.in_channels, cols_n, kernels.data(), in_item(input, plan.rank, i), S::zero(), &mut cols);
        let dst = out_item(&mut out, plan.rank, i);
        for (c, chunk) in dst.chunks_mut(plane).enumerate() {
            chunk.iter_mut().for_each(|v| *v = bias.data()[c]);
        }
        col2im(&cols, &g, dst);
    }
    Ok(out)
}

/// Gradients of conv_transpose2d: `(d_input, d_kernels, d_bias)`.
pub fn conv_transpose2d_backward<S: Scalar>(
    input: &Tensor<S>,
    kernels: &Tensor<S>,
    grad_out: &Tensor<S>,
    stride: usize,
    padding: usize,
) -> Result<(Tensor<S>, Tensor<S>, Tensor<S>)> {
    let co = kernels.dim(1);
    let bias = Tensor::zeros(&[co]);
    let plan = TransposePlan::new(input, kernels, &bias, stride, padding)?;
    if grad_out.shape() != plan.output_shape().as_slice() {
        return Err(Error::dim(
            "conv_transpose2d_backward",
            format!("upstream gradient {:?} does not match output {:?}", grad_out.shape(), plan.output_shape()),
        ));
    }
    let g = plan.geometry;
    let (rows, cols_n) = (g.cols_rows(), g.cols_cols());
    let plane = g.height * g.width;
    let ci = plan.in_channels;
    let mut d_input = Tensor::zeros(input.shape());
    let mut d_kernels = Tensor::zeros(kernels.shape());
    let mut d_bias = Tensor::zeros(&[co]);
    let mut d_cols = vec![S::zero(); rows * cols_n];
    for i in 0..plan.batch {
        let gy = in_item(grad_out, plan.rank, i);
        for (c, chunk) in gy.chunks(plane).enumerate() {
            d_bias.data_mut()[c] += chunk.iter().copied().sum::<S>();
        }
        im2col(gy, &g, &mut d_cols);
        gemm_nn(ci, rows, cols_n, kernels.data(), &d_cols, S::zero(), out_item(&mut d_input, plan.rank, i));
        gemm_nt(ci, cols_n, rows, in_item(input, plan.rank, i), &d_cols, S::one(), d_kernels.data_mut());
    }
    Ok((d_input, d_kernels, d_bias))
}

/// Spatially flipped kernels with input/output channel axes swapped.
///
/// For stride 1, `conv_transpose2d(x, w, b, 1, p)` equals
/// `conv2d(x, flip_kernels(w), b, 1, k − 1 − p)`.
pub fn flip_kernels<S: Scalar>(kernels: &Tensor<S>) -> Tensor<S> {
    let (a, b, k) = (kernels.dim(0), kernels.dim(1), kernels.dim(2));
    let src = kernels.data();
    Tensor::from_fn(&[b, a, k, k], |idx| {
        let kj = idx % k;
        let ki = (idx / k) % k;
        let i = (idx / (k * k)) % a;
        let o = idx / (k * k * a);
        src[((i * b + o) * k + (k - 1 - ki)) * k + (k - 1 - kj)]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::RngExt;

    fn random(shape: &[usize], seed: u64) -> Tensor<f64> {
        let mut r = seeded(seed);
        Tensor::from_fn(shape, |_| r.random::<f64>() * 2.0 - 1.0)
    }

    /// Direct nested-loop cross-correlation.
    fn naive_conv(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>, s: usize, p: usize) -> Tensor<f64> {
        let (c, h, wd) = (x.dim(0), x.dim(1), x.dim(2));
        let (co, k) = (w.dim(0), w.dim(2));
        let ho = (h + 2 * p - k) / s + 1;
        let wo = (wd + 2 * p - k) / s + 1;
        let mut out = Tensor::zeros(&[co, ho, wo]);
        for o in 0..co {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = b.data()[o];
                    for ci in 0..c {
                        for ki in 0..k {
                            for kj in 0..k {
                                let iy = (oy * s + ki) as isize - p as isize;
                                let ix = (ox * s + kj) as isize - p as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd {
                                    acc += x.data()[(ci * h + iy as usize) * wd + ix as usize]
                                        * w.data()[((o * c + ci) * k + ki) * k + kj];
                                }
                            }
                        }
                    }
                    out.data_mut()[(o * ho + oy) * wo + ox] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn ones_kernel_sums_neighbourhood() {
        let x = Tensor::<f64>::full(&[1, 4, 4], 1.0);
        let w = Tensor::full(&[1, 1, 3, 3], 1.0);
        let y = conv2d(&x, &w, &Tensor::zeros(&[1]), 1, 1).unwrap();
        assert_eq!(y.shape(), &[1, 4, 4]);
        assert_eq!(y.data()[5], 9.0);
        assert_eq!(y.data()[0], 4.0);
    }

    #[test]
    fn identity_kernel_is_identity() {
        let x = random(&[3, 5, 7], 3);
        let mut w = Tensor::zeros(&[3, 3, 3, 3]);
        for c in 0..3 {
            w.data_mut()[((c * 3 + c) * 3 + 1) * 3 + 1] = 1.0;
        }
        let y = conv2d(&x, &w, &Tensor::zeros(&[3]), 1, 1).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn matches_nested_loop_oracle() {
        for (stride, padding) in [(1, 1), (1, 0), (2, 1)] {
            let x = random(&[2, 8, 8], 11);
            let w = random(&[4, 2, 3, 3], 12);
            let b = random(&[4], 13);
            if Geometry::conv("t", 2, 8, 8, 3, stride, padding).is_err() {
                continue;
            }
            let got = conv2d(&x, &w, &b, stride, padding).unwrap();
            let want = naive_conv(&x, &w, &b, stride, padding);
            assert_eq!(got.shape(), want.shape());
            for (a, b) in got.data().iter().zip(want.data()) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn batched_equals_per_item() {
        let x = random(&[3, 2, 6, 6], 5);
        let w = random(&[4, 2, 3, 3], 6);
        let b = random(&[4], 7);
        let y = conv2d(&x, &w, &b, 1, 1).unwrap();
        for i in 0..3 {
            let xi = Tensor::new(&[2, 6, 6], x.item(i).to_vec()).unwrap();
            let yi = conv2d(&xi, &w, &b, 1, 1).unwrap();
            assert_eq!(yi.data(), y.item(i));
        }
    }

    #[test]
    fn shape_errors_name_the_axis() {
        let x = random(&[2, 8, 8], 1);
        let w = random(&[4, 3, 3, 3], 2);
        let err = conv2d(&x, &w, &Tensor::zeros(&[4]), 1, 1).unwrap_err().to_string();
        assert!(err.contains("C_in"), "{err}");
        let w = random(&[4, 2, 2, 2], 2);
        assert!(conv2d(&x, &w, &Tensor::zeros(&[4]), 1, 1).is_err());
        let x = random(&[2, 8, 7], 1);
        let w = random(&[4, 2, 3, 3], 2);
        let err = conv2d(&x, &w, &Tensor::zeros(&[4]), 2, 0).unwrap_err().to_string();
        assert!(err.contains("axis H"), "{err}");
    }

    #[test]
    fn transpose_of_single_pixel_is_scaled_kernel() {
        let x = Tensor::<f64>::new(&[1, 1, 1], vec![2.5]).unwrap();
        let w = random(&[1, 1, 3, 3], 9);
        let b = Tensor::new(&[1], vec![0.25]).unwrap();
        let y = conv_transpose2d(&x, &w, &b, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 3, 3]);
        for (got, k) in y.data().iter().zip(w.data()) {
            assert!((got - (2.5 * k + 0.25)).abs() < 1e-12);
        }
    }

    #[test]
    fn transpose_of_zero_input_is_bias() {
        let x = Tensor::<f64>::zeros(&[2, 4, 4]);
        let w = random(&[2, 3, 3, 3], 1);
        let b = Tensor::new(&[3], vec![0.1, -0.2, 0.3]).unwrap();
        let y = conv_transpose2d(&x, &w, &b, 2, 1).unwrap();
        assert_eq!(y.shape(), &[3, 7, 7]);
        for c in 0..3 {
            assert!(y.data()[c * 49..(c + 1) * 49].iter().all(|&v| v == b.data()[c]));
        }
    }

    #[test]
    fn transpose_output_shape_inverts_conv_shape() {
        for (h, s, p) in [(8, 1, 1), (7, 2, 1), (9, 2, 0), (5, 1, 0)] {
            let x = random(&[2, h, h], 4);
            let w = random(&[3, 2, 3, 3], 5);
            if let Ok(y) = conv2d(&x, &w, &Tensor::zeros(&[3]), s, p) {
                let wt = random(&[3, 2, 3, 3], 6);
                let back = conv_transpose2d(&y, &wt, &Tensor::zeros(&[2]), s, p).unwrap();
                assert_eq!(back.shape(), x.shape(), "h={h} s={s} p={p}");
            }
        }
    }

    #[test]
    fn stride_one_transpose_equals_flipped_convolution() {
        let x = random(&[2, 6, 6], 21);
        let w = random(&[2, 3, 3, 3], 22);
        let b = random(&[3], 23);
        for p in [0, 1, 2] {
            let t = conv_transpose2d(&x, &w, &b, 1, p).unwrap();
            let c = conv2d(&x, &flip_kernels(&w), &b, 1, 2 - p).unwrap();
            assert_eq!(t.shape(), c.shape());
            for (a, b) in t.data().iter().zip(c.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_input_gradient_is_transposed_convolution() {
        // adjoint identity under one-hot upstream gradients
        let x = random(&[2, 7, 7], 31);
        let w = random(&[3, 2, 3, 3], 32);
        for (s, p) in [(1, 1), (2, 1), (1, 0)] {
            let y = conv2d(&x, &w, &Tensor::zeros(&[3]), s, p).unwrap();
            for hot in [0, y.numel() / 2, y.numel() - 1] {
                let mut g = Tensor::zeros(y.shape());
                g.data_mut()[hot] = 1.0;
                let (dx, _, _) = conv2d_backward(&x, &w, &g, s, p).unwrap();
                let t = conv_transpose2d(&g, &w, &Tensor::zeros(&[2]), s, p).unwrap();
                assert_eq!(dx.shape(), t.shape());
                for (a, b) in dx.data().iter().zip(t.data()) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }
}
