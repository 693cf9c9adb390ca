use super::tensor::{expect_axis, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && self.beta1 > 0.0
            && (0.0..1.0).contains(&self.beta2)
            && self.beta2 > 0.0
            && self.eps > 0.0;
        if !ok {
            return Err(Error::param("adam", format!("invalid hyperparameters {self:?}")));
        }
        Ok(())
    }
}

/// Moment buffers for one parameter group.
#[derive(Clone, Debug)]
pub struct AdamState<S> {
    pub config: AdamConfig,
    pub step_count: u64,
    m: Vec<Vec<S>>,
    v: Vec<Vec<S>>,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(config: AdamConfig, sizes: &[usize]) -> Result<Self> {
        config.validate()?;
        Ok(AdamState {
            config,
            step_count: 0,
            m: sizes.iter().map(|&n| vec![S::zero(); n]).collect(),
            v: sizes.iter().map(|&n| vec![S::zero(); n]).collect(),
        })
    }

    pub fn for_params(config: AdamConfig, params: &[&mut Tensor<S>]) -> Result<Self> {
        let sizes: Vec<usize> = params.iter().map(|p| p.numel()).collect();
        Self::new(config, &sizes)
    }

    pub fn second_moments(&self) -> impl Iterator<Item = &S> {
        self.v.iter().flatten()
    }

    /// One bias-corrected update of every parameter from its gradient buffer.
    /// Parameters without an allocated gradient are treated as zero-gradient.
    pub fn step(&mut self, params: &mut [&mut Tensor<S>]) -> Result<()> {
        expect_axis("adam_step", "parameter count", self.m.len(), params.len())?;
        for (k, p) in params.iter().enumerate() {
            expect_axis("adam_step", &format!("parameter {k}"), self.m[k].len(), p.numel())?;
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c = self.config;
        let bc1 = S::lit(1.0 - c.beta1.powi(t));
        let bc2 = S::lit(1.0 - c.beta2.powi(t));
        let (b1, b2) = (S::lit(c.beta1), S::lit(c.beta2));
        let (lr, eps) = (S::lit(c.lr), S::lit(c.eps));
        for (k, p) in params.iter_mut().enumerate() {
            let (w, g) = p.data_and_grad_mut();
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..w.len() {
                m[i] = b1 * m[i] + (S::one() - b1) * g[i];
                v[i] = b2 * v[i] + (S::one() - b2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                w[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Functional form over raw buffers: updates `params` in place.
pub fn adam_step<S: Scalar>(params: &mut [S], grads: &[S], state: &mut AdamState<S>) -> Result<()> {
    expect_axis("adam_step", "gradient", params.len(), grads.len())?;
    let mut t = Tensor::new(&[params.len()], params.to_vec())?;
    t.grad_mut().copy_from_slice(grads);
    state.step(&mut [&mut t])?;
    params.copy_from_slice(t.data());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_on_square_matches_hand_derivation() {
        // f(w) = w², w0 = 1 → g = 2; m̂ = 2, v̂ = 4 after bias correction
        let mut w = [1.0f64];
        let mut s = AdamState::new(AdamConfig::default(), &[1]).unwrap();
        adam_step(&mut w, &[2.0], &mut s).unwrap();
        let want = 1.0 - 0.001 * 2.0 / (2.0 + 1e-8);
        assert!((w[0] - want).abs() < 1e-12);
        assert_eq!(s.step_count, 1);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut w = [0.3f32, -1.2, 5.0];
        let orig = w;
        let mut s = AdamState::new(AdamConfig::default(), &[3]).unwrap();
        for _ in 0..100 {
            adam_step(&mut w, &[0.0; 3], &mut s).unwrap();
        }
        assert_eq!(w, orig);
    }

    #[test]
    fn shape_mismatch_is_dimension_error() {
        let mut s = AdamState::<f64>::new(AdamConfig::default(), &[2]).unwrap();
        assert!(matches!(adam_step(&mut [0.0; 3], &[0.0; 3], &mut s), Err(Error::Dimension { .. })));
        assert!(matches!(adam_step(&mut [0.0; 2], &[0.0; 3], &mut s), Err(Error::Dimension { .. })));
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        let bad = AdamConfig { beta1: 1.0, ..AdamConfig::default() };
        assert!(AdamState::<f64>::new(bad, &[1]).is_err());
    }
}
