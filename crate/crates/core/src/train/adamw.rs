//! AdamW with decoupled weight decay.
//!
//! Moments and the update arithmetic run in f64 regardless of the parameter
//! precision, so bias correction never loses low bits and the f32 training
//! path follows the same trajectory as a pure-f64 one to rounding.

use crate::error::{Error, Result};
use crate::model::ParamSet;
use crate::scalar::{from_f64, to_f64, Scalar};
use crate::train::config::OptimConfig;

/// First/second moment buffers plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl OptimState {
    pub fn new<S: Scalar>(params: &ParamSet<S>) -> Self {
        let m = params.entries().iter().map(|p| vec![0.0; p.tensor.numel()]).collect();
        let v = params.entries().iter().map(|p| vec![0.0; p.tensor.numel()]).collect();
        Self { t: 0, m, v }
    }
}

/// Apply one AdamW step. `grads` holds one f64 buffer per parameter, in the
/// parameter set's order.
pub fn adamw_step<S: Scalar>(
    params: &mut ParamSet<S>,
    grads: &[Vec<f64>],
    state: &mut OptimState,
    lr: f64,
    cfg: &OptimConfig,
) -> Result<()> {
    if grads.len() != params.len() {
        return Err(Error::Train(format!(
            "got {} gradient buffers for {} parameters",
            grads.len(),
            params.len()
        )));
    }
    if !(lr.is_finite() && lr >= 0.0) {
        return Err(Error::Train(format!("learning rate {lr} out of range")));
    }
    for (p, g) in params.entries().iter().zip(grads) {
        if g.len() != p.tensor.numel() {
            return Err(Error::Train(format!(
                "gradient for {} has {} elements, parameter has {}",
                p.name,
                g.len(),
                p.tensor.numel()
            )));
        }
        if let Some(bad) = g.iter().find(|v| !v.is_finite()) {
            return Err(Error::Train(format!("non-finite gradient {bad} in {}", p.name)));
        }
    }

    state.t += 1;
    let t = state.t;
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for ((param, grad), (m, v)) in params
        .entries_mut()
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let data = param.tensor.data_mut();
        for i in 0..data.len() {
            let g = grad[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            let w = to_f64(data[i]);
            let updated = w - lr * m_hat / (v_hat.sqrt() + cfg.eps) - lr * cfg.weight_decay * w;
            data[i] = from_f64::<S>(updated);
        }
    }
    Ok(())
}
