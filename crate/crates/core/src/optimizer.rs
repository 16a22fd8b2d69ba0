//! AdamW: bias-corrected adaptive moments with decoupled weight decay.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gradients::ParamGradient;
use crate::networks::LayerParams;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Floor added to `sqrt(v̂)`.
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    /// Learning rate `3e-5` and weight decay `1e-3` as used for prior
    /// training; moment rates and floor are the usual `0.9 / 0.999 / 1e-8`.
    fn default() -> Self {
        Self { learning_rate: 3e-5, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, weight_decay: 1e-3 }
    }
}

impl AdamWConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.weight_decay >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::ConfigInvalid("AdamW needs lr > 0, betas in [0, 1), floor > 0, decay >= 0"))
        }
    }
}

/// Moment accumulators laid out in the canonical flat order of every
/// network's parameters, one network after the other.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub config: AdamWConfig,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
    /// Neurons per network, fixing the expected shapes.
    pub shape: Vec<usize>,
}

impl OptimizerState {
    pub fn new(config: AdamWConfig, params: &[LayerParams]) -> Self {
        let total = params.iter().map(LayerParams::parameter_count).sum();
        Self {
            config,
            first_moment: vec![0.0; total],
            second_moment: vec![0.0; total],
            step: 0,
            shape: params.iter().map(LayerParams::neurons).collect(),
        }
    }

    /// One update `θ ← θ - η (m̂ / (sqrt(v̂) + e) + λ θ)`.
    pub fn step(&mut self, params: &mut [LayerParams], grads: &[ParamGradient]) -> Result<()> {
        if params.len() != self.shape.len() || grads.len() != self.shape.len() {
            return Err(Error::ShapeMismatch("one gradient per network, matching the optimizer state"));
        }
        for ((p, g), &n) in params.iter().zip(grads).zip(&self.shape) {
            if p.neurons() != n || g.neurons() != n {
                return Err(Error::ShapeMismatch("gradient and parameter widths must agree"));
            }
        }
        self.step += 1;
        let c = self.config;
        let bias1 = 1.0 - libm::pow(c.beta1, self.step as f64);
        let bias2 = 1.0 - libm::pow(c.beta2, self.step as f64);
        let mut offset = 0;
        for (p, g) in params.iter_mut().zip(grads) {
            let flat_grad = g.to_flat();
            let first = &mut self.first_moment[offset..offset + flat_grad.len()];
            let second = &mut self.second_moment[offset..offset + flat_grad.len()];
            let mut i = 0;
            p.for_each_mut(|theta| {
                let gi = flat_grad[i];
                first[i] = c.beta1 * first[i] + (1.0 - c.beta1) * gi;
                second[i] = c.beta2 * second[i] + (1.0 - c.beta2) * gi * gi;
                let m_hat = first[i] / bias1;
                let v_hat = second[i] / bias2;
                *theta -= c.learning_rate * (m_hat / (libm::sqrt(v_hat) + c.epsilon) + c.weight_decay * *theta);
                i += 1;
            });
            offset += flat_grad.len();
        }
        Ok(())
    }
}
