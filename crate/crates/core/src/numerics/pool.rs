//! Max pooling and nearest-neighbour upsampling over `[.., H, W]` maps.

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn spatial<S: Scalar>(op: &'static str, t: &Tensor<S>) -> Result<(usize, usize, usize)> {
    if t.rank() < 3 {
        return Err(Error::dim(op, format!("expected [.., C, H, W], got {:?}", t.shape())));
    }
    let r = t.rank();
    let (h, w) = (t.dim(r - 2), t.dim(r - 1));
    Ok((t.numel() / (h * w), h, w))
}

/// Non-overlapping max pooling. Returns the pooled map and, per output cell,
/// the flat input index that won. Ties go to the first index in row-major order.
pub fn maxpool2d<S: Scalar>(input: &Tensor<S>, window: usize) -> Result<(Tensor<S>, Vec<usize>)> {
    const OP: &str = "maxpool2d";
    if window == 0 {
        return Err(Error::param(OP, "window must be positive"));
    }
    let (planes, h, w) = spatial(OP, input)?;
    if h % window != 0 || w % window != 0 {
        return Err(Error::dim(OP, format!("H×W = {h}×{w} not divisible by window {window}")));
    }
    let (ho, wo) = (h / window, w / window);
    let mut shape = input.shape().to_vec();
    let r = shape.len();
    shape[r - 2] = ho;
    shape[r - 1] = wo;
    let src = input.data();
    let mut out = Vec::with_capacity(planes * ho * wo);
    let mut idx = Vec::with_capacity(planes * ho * wo);
    if window == 2 {
        for p in 0..planes {
            let base = p * h * w;
            for oy in 0..ho {
                let top = base + 2 * oy * w;
                let (r0, r1) = (&src[top..top + w], &src[top + w..top + 2 * w]);
                for ox in 0..wo {
                    let j = 2 * ox;
                    // row-major order: (0,0), (0,1), (1,0), (1,1)
                    let (mut best, mut best_v) = (top + j, r0[j]);
                    if r0[j + 1] > best_v {
                        best = top + j + 1;
                        best_v = r0[j + 1];
                    }
                    if r1[j] > best_v {
                        best = top + w + j;
                        best_v = r1[j];
                    }
                    if r1[j + 1] > best_v {
                        best = top + w + j + 1;
                        best_v = r1[j + 1];
                    }
                    out.push(best_v);
                    idx.push(best);
                }
            }
        }
        return Ok((Tensor::new(&shape, out)?, idx));
    }
    for p in 0..planes {
        let base = p * h * w;
        for oy in 0..ho {
            let top = base + oy * window * w;
            for ox in 0..wo {
                let mut best = top + ox * window;
                let mut best_v = src[best];
                for dy in 0..window {
                    let row = top + dy * w + ox * window;
                    for (i, &v) in src[row..row + window].iter().enumerate() {
                        if v > best_v {
                            best_v = v;
                            best = row + i;
                        }
                    }
                }
                out.push(best_v);
                idx.push(best);
            }
        }
    }
    Ok((Tensor::new(&shape, out)?, idx))
}

pub fn maxpool2d_backward<S: Scalar>(
    input_shape: &[usize],
    indices: &[usize],
    grad_out: &Tensor<S>,
) -> Result<Tensor<S>> {
    if indices.len() != grad_out.numel() {
        return Err(Error::dim("maxpool2d_backward", "index/gradient length mismatch"));
    }
    let mut d = Tensor::zeros(input_shape);
    let dst = d.data_mut();
    for (&i, &g) in indices.iter().zip(grad_out.data()) {
        dst[i] += g;
    }
    Ok(d)
}

pub fn upsample2d_nearest<S: Scalar>(input: &Tensor<S>, factor: usize) -> Result<Tensor<S>> {
    const OP: &str = "upsample2d_nearest";
    if factor < 1 {
        return Err(Error::param(OP, "factor must be ≥ 1"));
    }
    let (planes, h, w) = spatial(OP, input)?;
    let (ho, wo) = (h * factor, w * factor);
    let mut shape = input.shape().to_vec();
    let r = shape.len();
    shape[r - 2] = ho;
    shape[r - 1] = wo;
    let src = input.data();
    let mut out = vec![S::zero(); planes * ho * wo];
    for (p, dst_plane) in out.chunks_mut(ho * wo).enumerate() {
        for (y, line) in dst_plane.chunks_mut(wo).enumerate() {
            let row = &src[p * h * w + (y / factor) * w..][..w];
            for (cell, &v) in line.chunks_mut(factor).zip(row) {
                cell.fill(v);
            }
        }
    }
    Tensor::new(&shape, out)
}

/// Adjoint of upsampling: sums each `factor × factor` block.
pub fn upsample2d_backward<S: Scalar>(grad_out: &Tensor<S>, factor: usize) -> Result<Tensor<S>> {
    const OP: &str = "upsample2d_backward";
    let (planes, ho, wo) = spatial(OP, grad_out)?;
    if factor == 0 || ho % factor != 0 || wo % factor != 0 {
        return Err(Error::dim(OP, format!("{ho}×{wo} not divisible by {factor}")));
    }
    let (h, w) = (ho / factor, wo / factor);
    let mut shape = grad_out.shape().to_vec();
    let r = shape.len();
    shape[r - 2] = h;
    shape[r - 1] = w;
    let mut d = Tensor::zeros(&shape);
    let src = grad_out.data();
    let dst = d.data_mut();
    for p in 0..planes {
        for y in 0..ho {
            let line = &src[p * ho * wo + y * wo..][..wo];
            let row = &mut dst[p * h * w + (y / factor) * w..][..w];
            for (d, cell) in row.iter_mut().zip(line.chunks(factor)) {
                *d += cell.iter().copied().sum::<S>();
            }
        }
    }
    Ok(d)
}
