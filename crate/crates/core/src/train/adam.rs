//! Adam over the six gains.

use serde::{Deserialize, Serialize};

use crate::processor::GainParams;
use crate::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AdamState {
    pub m: [f64; 6],
    pub v: [f64; 6],
    pub step: u64,
}

/// One bias-corrected Adam update. The new gains are clamped to the legal
/// gain range.
pub fn adam_step(p: &GainParams, g: &[f64; 6], state: &AdamState, lr: f64) -> Result<(GainParams, AdamState)> {
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { stage: "optimizer gradient" });
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::invalid(format!("learning rate must be positive, got {lr}")));
    }
    let step = state.step + 1;
    let c1 = 1.0 - BETA1.powi(step as i32);
    let c2 = 1.0 - BETA2.powi(step as i32);
    let mut next = AdamState { step, ..*state };
    let mut gains = *p.values();
    for k in 0..6 {
        next.m[k] = BETA1 * state.m[k] + (1.0 - BETA1) * g[k];
        next.v[k] = BETA2 * state.v[k] + (1.0 - BETA2) * g[k] * g[k];
        let m_hat = next.m[k] / c1;
        let v_hat = next.v[k] / c2;
        gains[k] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
    Ok((GainParams::new(gains)?, next))
}
