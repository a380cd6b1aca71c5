//! First-order optimizer primitives: plain SGD and bias-corrected Adam.

use crate::error::{Error, Result};
use crate::nn::params::ParamVector;

/// One gradient-descent step: `theta - alpha * grad`.
pub fn sgd_step(params: &ParamVector, grad: &ParamVector, alpha: f64) -> Result<ParamVector> {
    if !(alpha > 0.0) {
        return Err(Error::config(format!("sgd_step requires alpha > 0, got {alpha}")));
    }
    if params.len() != grad.len() {
        return Err(Error::config("sgd_step length mismatch"));
    }
    grad.check_finite("sgd_step gradient")?;
    let mut out = params.clone();
    for (p, &g) in out.values_mut().iter_mut().zip(grad.values()) {
        *p -= alpha * g;
    }
    Ok(out)
}

/// Adam optimizer state over one flat array.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn len(&self) -> usize {
        self.first_moment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_moment.is_empty()
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Zeroes both moments and the step counter, keeping hyperparameters.
    pub fn reset(&mut self) {
        self.first_moment.iter_mut().for_each(|m| *m = 0.0);
        self.second_moment.iter_mut().for_each(|v| *v = 0.0);
        self.step_count = 0;
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }
}

/// One bias-corrected Adam update applied in place to `target`.
pub fn adam_step(state: &mut AdamState, target: &mut [f64], grad: &[f64]) -> Result<()> {
    if target.len() != state.len() || grad.len() != state.len() {
        return Err(Error::config("adam_step length mismatch"));
    }
    if grad.iter().any(|g| !g.is_finite()) || target.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("adam_step input".into()));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for k in 0..grad.len() {
        let g = grad[k];
        state.first_moment[k] = state.beta1 * state.first_moment[k] + (1.0 - state.beta1) * g;
        state.second_moment[k] =
            state.beta2 * state.second_moment[k] + (1.0 - state.beta2) * g * g;
        let m_hat = state.first_moment[k] / bc1;
        let v_hat = state.second_moment[k] / bc2;
        target[k] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}
