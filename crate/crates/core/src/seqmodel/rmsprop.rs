use serde::{Deserialize, Serialize};

use super::tensor::ParamSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RmsPropConfig {
    pub lr: f64,
    pub decay: f64,
    pub momentum: f64,
    pub epsilon: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        RmsPropConfig {
            lr: 2e-4,
            decay: 0.95,
            momentum: 1e-8,
            epsilon: 1e-10,
        }
    }
}

/// Momentum-style RMSprop:
///
/// ```text
/// ms  <- decay*ms + (1-decay)*g^2
/// mom <- momentum*mom + lr*g/sqrt(ms + eps)
/// p   <- p - mom
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct RmsProp {
    pub config: RmsPropConfig,
    pub ms: ParamSet,
    pub mom: ParamSet,
}

impl RmsProp {
    pub fn new(config: RmsPropConfig, params: &ParamSet) -> Self {
        RmsProp {
            config,
            ms: params.zeros_like(),
            mom: params.zeros_like(),
        }
    }

    pub fn update(&mut self, params: &mut ParamSet, grads: &ParamSet) {
        let c = self.config;
        let slots = params
            .tensors
            .iter_mut()
            .zip(&grads.tensors)
            .zip(self.ms.tensors.iter_mut().zip(self.mom.tensors.iter_mut()));
        for ((p, g), (ms, mom)) in slots {
            debug_assert_eq!(p.shape, g.shape);
            for i in 0..p.data.len() {
                let gi = g.data[i];
                ms.data[i] = c.decay * ms.data[i] + (1.0 - c.decay) * gi * gi;
                mom.data[i] = c.momentum * mom.data[i] + c.lr * gi / (ms.data[i] + c.epsilon).sqrt();
                p.data[i] -= mom.data[i];
            }
        }
    }
}
