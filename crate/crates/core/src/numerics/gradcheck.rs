//! Central finite-difference verification of analytic gradients (f64).

use rand::RngExt;

use super::layer::Module;
use super::tensor::Tensor;
use crate::error::Result;
use crate::rng::{seeded, Prng};

/// Denominator floor for the relative error, so that entries whose true
/// gradient is numerically zero are compared absolutely.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Max relative error between `analytic` and central differences of `f` at `x`.
pub fn finite_difference_check(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], analytic: &[f64], epsilon: f64) -> f64 {
    assert_eq!(x.len(), analytic.len());
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        probe[i] = x[i] + epsilon;
        let up = f(&probe);
        probe[i] = x[i] - epsilon;
        let down = f(&probe);
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * epsilon);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    worst
}

/// Errors for one module check, split by input and parameters.
#[derive(Clone, Debug, Default)]
pub struct ModuleCheck {
    pub input: f64,
    pub params: Vec<f64>,
}

impl ModuleCheck {
    pub fn max(&self) -> f64 {
        self.params.iter().copied().fold(self.input, f64::max)
    }
}

/// Checks a layer under the scalar objective `Σ r ⊙ layer(x)` with a random
/// weighting `r`. Stochastic layers see the same random stream on every
/// evaluation.
pub fn check_module(module: &mut dyn Module<f64>, input: &Tensor<f64>, seed: u64, epsilon: f64) -> Result<ModuleCheck> {
    let stream = || seeded(seed ^ 0x5eed);
    let out = module.forward(input, &mut stream())?;
    let mut r: Prng = seeded(seed);
    let weights = Tensor::from_fn(out.shape(), |_| r.random::<f64>() * 2.0 - 1.0);

    for p in module.params_mut() {
        p.zero_grad();
    }
    module.forward(input, &mut stream())?;
    let d_input = module.backward(&weights)?;
    let analytic_params: Vec<Vec<f64>> =
        module.params().iter().map(|p| p.grad().map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; p.numel()])).collect();

    let objective = |m: &mut dyn Module<f64>, x: &Tensor<f64>| -> f64 {
        let y = m.forward(x, &mut stream()).expect("forward during check");
        y.data().iter().zip(weights.data()).map(|(a, b)| a * b).sum()
    };

    let mut report = ModuleCheck::default();
    let mut x = input.clone();
    for i in 0..x.numel() {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + epsilon;
        let up = objective(module, &x);
        x.data_mut()[i] = orig - epsilon;
        let down = objective(module, &x);
        x.data_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        report.input = report.input.max(relative_error(d_input.data()[i], numeric));
    }

    for (k, analytic) in analytic_params.iter().enumerate() {
        let mut worst = 0.0f64;
        for (i, &a) in analytic.iter().enumerate() {
            let orig = module.params()[k].data()[i];
            module.params_mut()[k].data_mut()[i] = orig + epsilon;
            let up = objective(module, input);
            module.params_mut()[k].data_mut()[i] = orig - epsilon;
            let down = objective(module, input);
            module.params_mut()[k].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * epsilon);
            worst = worst.max(relative_error(a, numeric));
        }
        report.params.push(worst);
    }
    Ok(report)
}
