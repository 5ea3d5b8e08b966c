use serde::{Deserialize, Serialize};

use super::network::Params;
use super::NeuralError;

/// Bias-corrected Adam with per-parameter moments over the flat parameter order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
}

impl AdamState {
    pub fn new(param_count: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

pub fn adam_step(params: &mut Params, grads: &Params, state: &mut AdamState) -> Result<(), NeuralError> {
    let n = params.param_count();
    for (what, got) in [
        ("gradient", grads.param_count()),
        ("adam moments", state.first_moment.len()),
    ] {
        if got != n {
            return Err(NeuralError::ShapeMismatch {
                what,
                expected: n,
                got,
            });
        }
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let grads = grads.tensors();
    let mut off = 0;
    for (p, g) in params.tensors_mut().into_iter().zip(grads) {
        let m = &mut state.first_moment[off..off + p.len()];
        let v = &mut state.second_moment[off..off + p.len()];
        for j in 0..p.len() {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            p[j] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
        off += p.len();
    }
    Ok(())
}
