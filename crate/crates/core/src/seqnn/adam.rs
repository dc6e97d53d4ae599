use serde::{Deserialize, Serialize};

use super::tensor::{Mat, Param};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    /// Per-epoch multiplicative learning-rate decay.
    pub gamma: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            gamma: 0.99,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.gamma > 0.0
            && self.gamma <= 1.0
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Adam settings {self:?}")))
        }
    }
}

/// Adam with bias correction and exponential per-epoch learning-rate decay.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    epoch: u32,
    m: Vec<Mat>,
    v: Vec<Mat>,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[&Param]) -> Result<Self> {
        config.validate()?;
        Ok(AdamState {
            config,
            step: 0,
            epoch: 0,
            m: params.iter().map(|p| Mat::zeros(p.value.raw_dim())).collect(),
            v: params.iter().map(|p| Mat::zeros(p.value.raw_dim())).collect(),
        })
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn set_epoch(&mut self, epoch: u32) {
        self.epoch = epoch;
    }

    /// `lr · γ^epoch`.
    pub fn effective_lr(&self) -> f64 {
        self.config.lr * self.config.gamma.powi(self.epoch as i32)
    }

    /// Applies one update from the gradients stored in each `Param::grad`.
    pub fn step(&mut self, params: &mut [&mut Param]) -> Result<()> {
        if params.len() != self.m.len()
            || params
                .iter()
                .zip(&self.m)
                .any(|(p, m)| p.value.dim() != m.dim())
        {
            return Err(Error::Usage(
                "optimizer state does not match the parameter list".into(),
            ));
        }
        self.step += 1;
        let AdamConfig {
            beta1, beta2, eps, ..
        } = self.config;
        let lr = self.effective_lr();
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            ndarray::Zip::from(&mut p.value)
                .and(&p.grad)
                .and(m)
                .and(v)
                .for_each(|w, &g, m, v| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *w -= lr * m_hat / (v_hat.sqrt() + eps);
                });
        }
        Ok(())
    }
}
