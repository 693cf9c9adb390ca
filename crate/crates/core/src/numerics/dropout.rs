use rand::RngExt;

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::Prng;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

pub fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::param("dropout", format!("rate {rate} outside [0, 1)")));
    }
    Ok(())
}

/// Inverted dropout. Returns the output and the per-element multiplier that
/// was applied (`0` or `1/(1 − rate)`), which is also the backward mask.
pub fn dropout<S: Scalar>(input: &Tensor<S>, rate: f64, mode: Mode, rng: &mut Prng) -> Result<(Tensor<S>, Vec<S>)> {
    check_rate(rate)?;
    if mode == Mode::Eval || rate == 0.0 {
        return Ok((input.clone(), vec![S::one(); input.numel()]));
    }
    let keep = S::lit(1.0 / (1.0 - rate));
    let mask: Vec<S> = (0..input.numel()).map(|_| if rng.random::<f64>() < rate { S::zero() } else { keep }).collect();
    let data = input.data().iter().zip(&mask).map(|(&x, &m)| x * m).collect();
    Ok((Tensor::new(input.shape(), data)?, mask))
}
