use super::tensor::Tensor;
use crate::scalar::Scalar;

#[inline]
pub fn sigmoid_scalar<S: Scalar>(x: S) -> S {
    // Split on sign so exp never overflows.
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        flush_subnormal(e / (S::one() + e))
    }
}

/// Subnormals become zero. Saturated sigmoids otherwise flood the backward
/// pass with them, and subnormal arithmetic is very slow on x86.
#[inline]
pub fn flush_subnormal<S: Scalar>(v: S) -> S {
    if v.abs() < S::min_positive_value() {
        S::zero()
    } else {
        v
    }
}

pub fn relu<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    x.map(|v| if v > S::zero() { v } else { S::zero() })
}

pub fn sigmoid<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    x.map(sigmoid_scalar)
}

pub fn tanh<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    x.map(|v| v.tanh())
}

/// Gradient of relu given the forward input.
pub fn relu_backward<S: Scalar>(input: &Tensor<S>, grad_out: &Tensor<S>) -> Tensor<S> {
    let data =
        input.data().iter().zip(grad_out.data()).map(|(&x, &g)| if x > S::zero() { g } else { S::zero() }).collect();
    Tensor::new(input.shape(), data).expect("same shape")
}

/// Gradient of sigmoid given the forward output.
pub fn sigmoid_backward<S: Scalar>(output: &Tensor<S>, grad_out: &Tensor<S>) -> Tensor<S> {
    let data =
        output.data().iter().zip(grad_out.data()).map(|(&y, &g)| flush_subnormal(g * y * (S::one() - y))).collect();
    Tensor::new(output.shape(), data).expect("same shape")
}

/// Gradient of tanh given the forward output.
pub fn tanh_backward<S: Scalar>(output: &Tensor<S>, grad_out: &Tensor<S>) -> Tensor<S> {
    let data = output.data().iter().zip(grad_out.data()).map(|(&y, &g)| g * (S::one() - y * y)).collect();
    Tensor::new(output.shape(), data).expect("same shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let x = Tensor::<f64>::new(&[2], vec![-1.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 2.0]);
        assert_eq!(sigmoid_scalar(0.0f64), 0.5);
        assert_eq!(sigmoid_scalar(-1000.0f64), 0.0);
        assert_eq!(sigmoid_scalar(1000.0f64), 1.0);
        assert_eq!(tanh(&Tensor::<f64>::zeros(&[1])).data(), &[0.0]);
    }
}
