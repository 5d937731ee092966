//! Adam with bias correction.

use super::DenseMatrix;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 0.005, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment estimates, one pair per parameter tensor.
#[derive(Clone, Debug)]
pub struct AdamState {
    step: usize,
    first: Vec<DenseMatrix>,
    second: Vec<DenseMatrix>,
}

impl AdamState {
    pub fn new(params: &[DenseMatrix]) -> Self {
        let zeros = || params.iter().map(|p| DenseMatrix::zeros(p.rows(), p.cols())).collect();
        Self { step: 0, first: zeros(), second: zeros() }
    }

    pub fn step(&self) -> usize {
        self.step
    }
}

/// One Adam step, in place. Fails (leaving parameters untouched) when any
/// adjoint is non-finite.
pub fn adam_update(
    params: &mut [DenseMatrix],
    adjoints: &[DenseMatrix],
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != adjoints.len() || params.len() != state.first.len() {
        return Err(Error::ShapeMismatch(format!(
            "adam: {} params, {} adjoints, {} state slots",
            params.len(),
            adjoints.len(),
            state.first.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(adjoints).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.first[i].shape() {
            return Err(Error::ShapeMismatch(format!("adam: tensor {i} shapes disagree")));
        }
    }
    if adjoints.iter().any(|g| !g.is_finite()) {
        return Err(Error::GradientBlowUp { step: state.step + 1 });
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(adjoints)
        .zip(state.first.iter_mut().zip(state.second.iter_mut()))
    {
        let ps = p.as_mut_slice();
        let ms = m.as_mut_slice();
        let vs = v.as_mut_slice();
        for (j, &gj) in g.as_slice().iter().enumerate() {
            ms[j] = cfg.beta1 * ms[j] + (1.0 - cfg.beta1) * gj;
            vs[j] = cfg.beta2 * vs[j] + (1.0 - cfg.beta2) * gj * gj;
            let m_hat = ms[j] / bc1;
            let v_hat = vs[j] / bc2;
            ps[j] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
