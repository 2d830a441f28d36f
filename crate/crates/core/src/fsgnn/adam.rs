//! Adam with decoupled weight decay.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::model::ParamSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub config: AdamConfig,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        let zeros: Vec<Array2<f64>> = params
            .tensors()
            .iter()
            .map(|t| Array2::zeros(t.raw_dim()))
            .collect();
        AdamState {
            step: 0,
            config: AdamConfig::default(),
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One update: `θ ← θ − lr·wd·θ`, then the bias-corrected Adam step.
pub fn adam_step(
    params: &mut ParamSet,
    grads: &ParamSet,
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
) {
    state.step += 1;
    let AdamConfig { beta1, beta2, eps } = state.config;
    let c1 = 1.0 - beta1.powi(state.step as i32);
    let c2 = 1.0 - beta2.powi(state.step as i32);
    let tensors = params.tensors_mut().into_iter().zip(grads.tensors());
    for ((theta, g), (m, v)) in tensors.zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        ndarray::Zip::from(theta)
            .and(g)
            .and(m)
            .and(v)
            .for_each(|theta, &g, m, v| {
                *theta -= lr * weight_decay * *theta;
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *theta -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fsgnn::model::ModelConfig;

    fn scalar_set(x: f64) -> ParamSet {
        let cfg = ModelConfig {
            dim: 1,
            bases: 1,
            layers: 0,
            ..ModelConfig::default()
        };
        let mut p = ParamSet::zeros(&cfg);
        p.tensors_mut().into_iter().for_each(|t| t.fill(x));
        p
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = scalar_set(0.5);
        let g = scalar_set(1.0);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, 0.001, 0.0);
        assert!(p.tensors().iter().all(|t| (t[[0, 0]] - 0.499).abs() < 1e-9));
    }

    #[test]
    fn zero_gradient_no_decay_is_a_no_op() {
        let mut p = scalar_set(0.25);
        let g = scalar_set(0.0);
        let mut s = AdamState::new(&p);
        for _ in 0..5 {
            adam_step(&mut p, &g, &mut s, 0.001, 0.0);
        }
        assert_eq!(p, scalar_set(0.25));
    }
}
