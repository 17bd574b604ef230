use serde::{Deserialize, Serialize};

use super::layout::Gradients;
use super::net::TreePolicy;
use crate::error::NeuralError;
use crate::scalar::Scalar;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments, one entry per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        AdamState {
            config,
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            t: 0,
        }
    }

    pub fn for_policy(policy: &TreePolicy<T>, config: AdamConfig) -> Self {
        Self::new(policy.num_params(), config)
    }

    /// One bias-corrected update of the trainable parameters. A non-finite
    /// gradient leaves parameters and moments untouched.
    pub fn step(&mut self, policy: &mut TreePolicy<T>, grads: &Gradients<T>) -> Result<(), NeuralError> {
        let trainable = policy.layout().trainable_mask();
        self.step_raw(policy.params_mut(), grads, &trainable)
    }

    pub fn step_raw(&mut self, params: &mut [T], grads: &Gradients<T>, trainable: &[bool]) -> Result<(), NeuralError> {
        if grads.len() != params.len() || self.m.len() != params.len() || trainable.len() != params.len() {
            return Err(NeuralError::Shape(format!(
                "adam over {} moments, {} parameters, {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        if !grads.is_finite() {
            return Err(NeuralError::NonFiniteGradient);
        }
        self.t += 1;
        let c = &self.config;
        let (b1, b2) = (T::from_f64_lossy(c.beta1), T::from_f64_lossy(c.beta2));
        let t = self.t as i32;
        let bc1 = T::one() - b1.powi(t);
        let bc2 = T::one() - b2.powi(t);
        let lr = T::from_f64_lossy(c.lr);
        let eps = T::from_f64_lossy(c.eps);
        for i in 0..params.len() {
            if !trainable[i] {
                continue;
            }
            let g = grads.data[i];
            self.m[i] = b1 * self.m[i] + (T::one() - b1) * g;
            self.v[i] = b2 * self.v[i] + (T::one() - b2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}
