use super::linalg::{gemm_nn, gemm_nt, gemm_tn};
use super::tensor::{expect_axis, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn rows_cols<S: Scalar>(op: &'static str, x: &Tensor<S>) -> Result<(usize, usize)> {
    match *x.shape() {
        [n] => Ok((1, n)),
        [b, n] => Ok((b, n)),
        _ => Err(Error::dim(op, format!("expected [N, n] or [n], got {:?}", x.shape()))),
    }
}

/// Affine map `y = W·x + b` applied to each row of `input`.
pub fn dense<S: Scalar>(input: &Tensor<S>, weights: &Tensor<S>, bias: &Tensor<S>) -> Result<Tensor<S>> {
    const OP: &str = "dense";
    let (batch, n) = rows_cols(OP, input)?;
    if weights.rank() != 2 {
        return Err(Error::dim(OP, format!("weights must be [m, n], got {:?}", weights.shape())));
    }
    let m = weights.dim(0);
    expect_axis(OP, "n (input features)", weights.dim(1), n)?;
    expect_axis(OP, "m (bias)", m, bias.numel())?;
    let mut out = Vec::with_capacity(batch * m);
    for _ in 0..batch {
        out.extend_from_slice(bias.data());
    }
    gemm_nt(batch, n, m, input.data(), weights.data(), S::one(), &mut out);
    let shape = if input.rank() == 1 { vec![m] } else { vec![batch, m] };
    Tensor::new(&shape, out)
}

/// `(d_input, d_weights, d_bias)` for [`dense`].
pub fn dense_backward<S: Scalar>(
    input: &Tensor<S>,
    weights: &Tensor<S>,
    grad_out: &Tensor<S>,
) -> Result<(Tensor<S>, Tensor<S>, Tensor<S>)> {
    const OP: &str = "dense_backward";
    let (batch, n) = rows_cols(OP, input)?;
    let m = weights.dim(0);
    expect_axis(OP, "upstream", batch * m, grad_out.numel())?;
    let mut d_input = Tensor::zeros(input.shape());
    gemm_nn(batch, m, n, grad_out.data(), weights.data(), S::zero(), d_input.data_mut());
    let mut d_weights = Tensor::zeros(weights.shape());
    gemm_tn(m, batch, n, grad_out.data(), input.data(), S::zero(), d_weights.data_mut());
    let mut d_bias = Tensor::zeros(&[m]);
    for row in grad_out.data().chunks(m) {
        for (d, &g) in d_bias.data_mut().iter_mut().zip(row) {
            *d += g;
        }
    }
    Ok((d_input, d_weights, d_bias))
}
