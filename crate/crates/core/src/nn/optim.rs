use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::params::Parameterized;
use crate::error::{Error, Result};
use crate::math::sqrt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Rescale gradients whose global L2 norm exceeds this value.
    pub clip_norm: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: Some(5.0),
        }
    }
}

impl OptimizerConfig {
    pub fn sgd(lr: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Sgd,
            lr,
            clip_norm: None,
            ..Default::default()
        }
    }

    pub fn adam(lr: f64) -> Self {
        OptimizerConfig {
            lr,
            clip_norm: None,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Self {
        Optimizer {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    /// Applies one update and returns the pre-clipping gradient norm.
    pub fn step<P: Parameterized>(&mut self, params: &mut P, grads: &P) -> Result<f64> {
        let gblocks = grads.blocks();
        let mut norm_sq = 0.0;
        for b in &gblocks {
            if !crate::math::all_finite(b.data) {
                return Err(Error::NonFiniteGradient(b.name.clone()));
            }
            norm_sq += crate::math::norm_sq(b.data);
        }
        let norm = sqrt(norm_sq);
        let scale = match self.config.clip_norm {
            Some(max) if norm > max && norm > 0.0 => max / norm,
            _ => 1.0,
        };

        let mut pblocks = params.blocks_mut();
        if pblocks.len() != gblocks.len() {
            return Err(Error::ShapeMismatch {
                what: "gradient blocks",
                expected: pblocks.len(),
                got: gblocks.len(),
            });
        }
        self.step += 1;
        let lr = self.config.lr;
        match self.config.kind {
            OptimizerKind::Sgd => {
                for (p, g) in pblocks.iter_mut().zip(&gblocks) {
                    for (pi, gi) in p.iter_mut().zip(g.data) {
                        *pi -= lr * scale * gi;
                    }
                }
            }
            OptimizerKind::Adam => {
                if self.m.is_empty() {
                    self.m = gblocks.iter().map(|b| vec![0.0; b.data.len()]).collect();
                    self.v = self.m.clone();
                }
                let (b1, b2, eps) = (self.config.beta1, self.config.beta2, self.config.eps);
                let bc1 = 1.0 - libm::pow(b1, self.step as f64);
                let bc2 = 1.0 - libm::pow(b2, self.step as f64);
                for (k, (p, g)) in pblocks.iter_mut().zip(&gblocks).enumerate() {
                    let (m, v) = (&mut self.m[k], &mut self.v[k]);
                    for i in 0..p.len() {
                        let gi = g.data[i] * scale;
                        m[i] = b1 * m[i] + (1.0 - b1) * gi;
                        v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                        let mhat = m[i] / bc1;
                        let vhat = v[i] / bc2;
                        p[i] -= lr * mhat / (sqrt(vhat) + eps);
                    }
                }
            }
        }
        Ok(norm)
    }
}
