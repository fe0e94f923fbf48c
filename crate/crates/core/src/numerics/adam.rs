use serde::{Deserialize, Serialize};

use super::{ParamStore, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment estimates for every parameter of a store.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step_count: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(store: &ParamStore, config: AdamConfig) -> Self {
        assert!(config.beta1 > 0.0 && config.beta1 < 1.0, "beta1 must be in (0,1)");
        assert!(config.beta2 > 0.0 && config.beta2 < 1.0, "beta2 must be in (0,1)");
        assert!(config.epsilon > 0.0, "epsilon must be positive");
        let zeros = || {
            store
                .iter()
                .map(|p| Tensor::new(p.value.shape().to_vec(), vec![0.0; p.value.len()]).unwrap())
                .collect::<Vec<_>>()
        };
        Self {
            config,
            step_count: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// Applies one bias-corrected Adam update using the gradients currently
    /// stored on each parameter.
    pub fn step(&mut self, store: &mut ParamStore) {
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for ((p, m), v) in store.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let values = p.value.data_mut();
            for (i, &g) in p.grad.data().iter().enumerate() {
                let mi = &mut m.data_mut()[i];
                *mi = beta1 * *mi + (1.0 - beta1) * g;
                let vi = &mut v.data_mut()[i];
                *vi = beta2 * *vi + (1.0 - beta2) * g * g;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                values[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
    }
}
