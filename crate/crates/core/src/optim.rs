//! AdamW with decoupled weight decay, and the cosine learning-rate schedule.
//!
//! The decay term is applied directly to the weights (`w -= lr * wd * w`),
//! separate from the adaptive gradient step. Biases and normalization
//! parameters are exempt from decay; running statistics are not touched by
//! the optimizer at all.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::net::{Gradients, NetworkParameters, ParamKind, Tensor};
use crate::real::Real;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub enum OptimError {
    NonFiniteUpdate { name: String },
    GradientMismatch { name: String },
}

impl fmt::Display for OptimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptimError::NonFiniteUpdate { name } => {
                write!(f, "non-finite update for parameter {name}")
            }
            OptimError::GradientMismatch { name } => {
                write!(f, "gradient map does not match parameter {name}")
            }
        }
    }
}

impl core::error::Error for OptimError {}

/// First and second moment estimates, one pair per trainable tensor.
#[derive(Clone, Debug)]
pub struct AdamMoments<R> {
    m: Vec<Tensor<R>>,
    v: Vec<Tensor<R>>,
}

impl<R: Real> AdamMoments<R> {
    /// Zero moments matching `params` (slot order = parameter order).
    pub fn zeros(params: &NetworkParameters<R>) -> Self {
        let m = params
            .entries()
            .iter()
            .map(|e| Tensor::zeros(&e.tensor.dims))
            .collect::<Vec<_>>();
        AdamMoments { v: m.clone(), m }
    }
}

/// One AdamW step with bias correction. `step_t` counts from 1.
///
/// With zero gradients and fresh moments the update reduces to the pure
/// decay `w *= 1 - lr * weight_decay` on decayed tensors and a no-op on
/// everything else.
pub fn adamw_step<R: Real>(
    params: &mut NetworkParameters<R>,
    grads: &Gradients<R>,
    moments: &mut AdamMoments<R>,
    step_t: u64,
    lr: f64,
    weight_decay: f64,
) -> Result<(), OptimError> {
    let beta1 = R::from_f64(ADAM_BETA1);
    let beta2 = R::from_f64(ADAM_BETA2);
    let one_m_b1 = R::from_f64(1.0 - ADAM_BETA1);
    let one_m_b2 = R::from_f64(1.0 - ADAM_BETA2);
    let eps = R::from_f64(ADAM_EPS);
    let lr_r = R::from_f64(lr);
    let bc1 = R::from_f64(1.0 - libm::pow(ADAM_BETA1, step_t as f64));
    let bc2 = R::from_f64(1.0 - libm::pow(ADAM_BETA2, step_t as f64));
    let decay = R::from_f64(lr * weight_decay);

    for (i, entry) in params.entries_mut().iter_mut().enumerate() {
        if entry.kind == ParamKind::RunningStat {
            continue;
        }
        let g_entry = &grads.entries()[i];
        if g_entry.name != entry.name || g_entry.tensor.dims != entry.tensor.dims {
            return Err(OptimError::GradientMismatch {
                name: entry.name.clone(),
            });
        }
        let g = &g_entry.tensor.data;
        let m = &mut moments.m[i].data;
        let v = &mut moments.v[i].data;
        let w = &mut entry.tensor.data;
        let apply_decay = entry.kind == ParamKind::Weight;
        for j in 0..w.len() {
            m[j] = beta1 * m[j] + one_m_b1 * g[j];
            v[j] = beta2 * v[j] + one_m_b2 * g[j] * g[j];
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            let mut next = w[j] - lr_r * m_hat / (v_hat.sqrt() + eps);
            if apply_decay {
                next -= decay * w[j];
            }
            if !next.is_finite() {
                return Err(OptimError::NonFiniteUpdate {
                    name: entry.name.clone(),
                });
            }
            w[j] = next;
        }
    }
    Ok(())
}

/// Cosine schedule: `0.5 * base_lr * (1 + cos(pi * step / total_steps))`,
/// decaying to zero. Evaluated once per optimizer step.
pub fn cosine_lr(base_lr: f64, step: u64, total_steps: u64) -> f64 {
    debug_assert!(total_steps >= 1);
    debug_assert!(step <= total_steps);
    0.5 * base_lr * (1.0 + libm::cos(core::f64::consts::PI * step as f64 / total_steps as f64))
}
