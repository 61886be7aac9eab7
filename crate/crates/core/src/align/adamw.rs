use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam with decoupled weight decay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamW {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            weight_decay,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamWState<F> {
    pub m: Vec<Tensor<F>>,
    pub v: Vec<Tensor<F>>,
    pub step: u64,
}

impl<F: Scalar> AdamWState<F> {
    pub fn new<'a>(shapes: impl IntoIterator<Item = &'a [usize]>) -> Self {
        let (m, v) = shapes
            .into_iter()
            .map(|s| (Tensor::zeros(s), Tensor::zeros(s)))
            .unzip();
        Self { m, v, step: 0 }
    }
}

impl AdamW {
    /// One update over all parameters. `decay[i]` selects whether the
    /// decoupled decay term applies to parameter `i`.
    pub fn step<F: Scalar>(
        &self,
        params: &mut [&mut Tensor<F>],
        grads: &[&Tensor<F>],
        decay: &[bool],
        state: &mut AdamWState<F>,
    ) -> Result<()> {
        let n = params.len();
        if grads.len() != n || decay.len() != n || state.m.len() != n || state.v.len() != n {
            return Err(Error::shape(
                "adamw_step",
                format!(
                    "{n} params, {} grads, {} decay flags, {} moments",
                    grads.len(),
                    decay.len(),
                    state.m.len()
                ),
            ));
        }
        state.step += 1;
        let t = state.step as i32;
        let bias1 = F::from_f64c(1.0 - self.beta1.powi(t));
        let bias2 = F::from_f64c(1.0 - self.beta2.powi(t));
        let (b1, b2) = (F::from_f64c(self.beta1), F::from_f64c(self.beta2));
        let (one, lr, eps) = (F::one(), F::from_f64c(self.lr), F::from_f64c(self.eps));
        let wd = F::from_f64c(self.weight_decay);
        for i in 0..n {
            let p = &mut *params[i];
            let g = grads[i];
            if p.shape() != g.shape() || p.shape() != state.m[i].shape() {
                return Err(Error::shape(
                    "adamw_step",
                    format!("param {i}: {:?} vs grad {:?}", p.shape(), g.shape()),
                ));
            }
            let decay_i = if decay[i] { wd } else { F::zero() };
            let m = state.m[i].data_mut();
            let v = state.v[i].data_mut();
            for (((theta, &g), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *theta = *theta - lr * (m_hat / (v_hat.sqrt() + eps) + decay_i * *theta);
            }
            p.ensure_finite("adamw_step")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_step(theta: f64, g: f64, lr: f64, wd: f64) -> f64 {
        let mut p = Tensor::<f64>::full(&[1], theta);
        let g = Tensor::full(&[1], g);
        let mut state = AdamWState::new([p.shape()]);
        AdamW::new(lr, wd)
            .step(&mut [&mut p], &[&g], &[true], &mut state)
            .unwrap();
        assert_eq!(state.step, 1);
        p.data()[0]
    }

    #[test]
    fn zero_gradient_no_decay_is_fixed_point() {
        assert_eq!(one_step(1.0, 0.0, 0.1, 0.0), 1.0);
    }

    #[test]
    fn hand_computed_first_steps() {
        assert!((one_step(1.0, 1.0, 0.1, 0.0) - 0.9).abs() < 1e-6);
        assert!((one_step(1.0, 1.0, 0.1, 0.1) - 0.89).abs() < 1e-6);
    }

    #[test]
    fn decay_only_step_shrinks_multiplicatively() {
        assert!((one_step(2.0, 0.0, 0.1, 0.5) - 2.0 * (1.0 - 0.05)).abs() < 1e-12);
    }

    #[test]
    fn decay_flag_off_skips_decay() {
        let mut p = Tensor::<f64>::full(&[2], 3.0);
        let g = Tensor::zeros(&[2]);
        let mut state = AdamWState::new([p.shape()]);
        AdamW::new(0.1, 0.5)
            .step(&mut [&mut p], &[&g], &[false], &mut state)
            .unwrap();
        assert_eq!(p.data(), &[3.0, 3.0]);
        assert!(state.v[0].data().iter().all(|&v| v >= 0.0));
    }
}
