use super::activation::sigmoid_scalar;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn same_shape<S: Scalar>(op: &'static str, a: &Tensor<S>, b: &Tensor<S>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::dim(op, format!("pred {:?} vs target {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// Mean of squared elementwise differences.
pub fn mse_loss<S: Scalar>(pred: &Tensor<S>, target: &Tensor<S>) -> Result<S> {
    same_shape("mse_loss", pred, target)?;
    let sum: f64 = pred.data().iter().zip(target.data()).map(|(&p, &t)| (p - t).as_f64().powi(2)).sum();
    Ok(S::lit(sum / pred.numel() as f64))
}

/// MSE value and its gradient with respect to `pred`.
pub fn mse_loss_grad<S: Scalar>(pred: &Tensor<S>, target: &Tensor<S>) -> Result<(S, Tensor<S>)> {
    let value = mse_loss(pred, target)?;
    let scale = S::lit(2.0 / pred.numel() as f64);
    let grad = pred.data().iter().zip(target.data()).map(|(&p, &t)| scale * (p - t)).collect();
    Ok((value, Tensor::new(pred.shape(), grad)?))
}

fn check_label(label: u8) -> Result<()> {
    if label > 1 {
        return Err(Error::param("bce_loss", format!("label {label} not in {{0, 1}}")));
    }
    Ok(())
}

/// Binary cross-entropy on a logit, `max(z, 0) − z·y + ln(1 + e^{−|z|})`.
pub fn bce_loss<S: Scalar>(logit: S, label: u8) -> Result<S> {
    check_label(label)?;
    if !logit.is_finite() {
        return Err(Error::NonFinite { op: "bce_loss", index: 0 });
    }
    let y = if label == 1 { S::one() } else { S::zero() };
    Ok(logit.max(S::zero()) - logit * y + (-logit.abs()).exp().ln_1p())
}

/// Mean BCE over a batch of logits and its gradient `(σ(z) − y)/N`.
pub fn bce_with_logits<S: Scalar>(logits: &Tensor<S>, labels: &[u8]) -> Result<(S, Tensor<S>)> {
    if logits.numel() != labels.len() {
        return Err(Error::dim("bce_with_logits", format!("{} logits vs {} labels", logits.numel(), labels.len())));
    }
    let n = labels.len() as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(labels.len());
    for (&z, &y) in logits.data().iter().zip(labels) {
        total += bce_loss(z, y)?.as_f64();
        let t = if y == 1 { S::one() } else { S::zero() };
        grad.push((sigmoid_scalar(z) - t) / S::lit(n));
    }
    Ok((S::lit(total / n), Tensor::new(logits.shape(), grad)?))
}
