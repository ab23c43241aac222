//! Bias-corrected Adam update, minimization convention.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(dim: usize, config: AdamConfig) -> Self {
        AdamState {
            step: 0,
            first_moment: vec![0.0; dim],
            second_moment: vec![0.0; dim],
            config,
        }
    }
}

/// One Adam step. Returns the advanced state and the updated parameters.
pub fn adam_step(
    state: &AdamState,
    params: &[f64],
    grads: &[f64],
) -> Result<(AdamState, Vec<f64>)> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(Error::Shape {
            context: "adam_step",
            expected: format!("{} entries", state.first_moment.len()),
            got: format!("params {}, grads {}", params.len(), grads.len()),
        });
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            what: "gradient",
            index: i,
        });
    }
    let c = state.config;
    let t = state.step + 1;
    let bc1 = 1.0 - c.beta1.powi(t as i32);
    let bc2 = 1.0 - c.beta2.powi(t as i32);
    let mut next = state.clone();
    next.step = t;
    let mut out = params.to_vec();
    for i in 0..params.len() {
        let m = c.beta1 * state.first_moment[i] + (1.0 - c.beta1) * grads[i];
        let v = c.beta2 * state.second_moment[i] + (1.0 - c.beta2) * grads[i] * grads[i];
        next.first_moment[i] = m;
        next.second_moment[i] = v;
        let m_hat = m / bc1;
        let v_hat = v / bc2;
        out[i] -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
    }
    Ok((next, out))
}
