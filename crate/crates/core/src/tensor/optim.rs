use serde::{Deserialize, Serialize};

use super::network::{flatten_gradients, Gradients, Network};
use crate::error::{input_err, PrismError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimKind {
    Sgd,
    Adam,
}

/// First-order optimizer with an exponential per-epoch learning-rate decay.
#[derive(Debug, Clone)]
pub struct OptimState {
    pub kind: OptimKind,
    learning_rate: f64,
    pub decay_per_epoch: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl OptimState {
    pub fn new(kind: OptimKind, learning_rate: f64, decay_per_epoch: f64) -> Result<Self> {
        if !(learning_rate > 0.0) || !learning_rate.is_finite() {
            return input_err("learning rate must be positive");
        }
        if !(decay_per_epoch > 0.0 && decay_per_epoch <= 1.0) {
            return input_err("decay must lie in (0, 1]");
        }
        Ok(OptimState {
            kind,
            learning_rate,
            decay_per_epoch,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        })
    }

    /// Adam with learning rate 0.005 and decay 0.99.
    pub fn adam_default() -> Self {
        Self::new(OptimKind::Adam, 0.005, 0.99).expect("valid defaults")
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn end_epoch(&mut self) {
        self.learning_rate *= self.decay_per_epoch;
    }

    /// Applies one update to a flat parameter vector. Parameters are left
    /// untouched when any gradient entry is non-finite.
    pub fn step_flat(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != grads.len() {
            return input_err("parameter/gradient length mismatch");
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(PrismError::Numeric("non-finite gradient".into()));
        }
        match self.kind {
            OptimKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= self.learning_rate * g;
                }
            }
            OptimKind::Adam => {
                if self.first_moment.len() != params.len() {
                    self.first_moment = vec![0.0; params.len()];
                    self.second_moment = vec![0.0; params.len()];
                    self.step = 0;
                }
                self.step += 1;
                let t = self.step as i32;
                let bc1 = 1.0 - self.beta1.powi(t);
                let bc2 = 1.0 - self.beta2.powi(t);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(self.first_moment.iter_mut())
                    .zip(self.second_moment.iter_mut())
                {
                    *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                    *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
                }
            }
        }
        Ok(())
    }

    /// Updates a network in place from layer gradients.
    pub fn step_network(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        let flat = flatten_gradients(grads);
        let mut params = net.parameters_flat();
        self.step_flat(&mut params, &flat)?;
        net.set_parameters_flat(&params)
    }
}
