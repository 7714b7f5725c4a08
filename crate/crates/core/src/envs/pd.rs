//! Joint-level PD actuation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stiffness, damping and symmetric torque saturation of a PD loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdGains {
    pub kp: f64,
    pub kd: f64,
    pub torque_limit: f64,
}

impl PdGains {
    pub fn new(kp: f64, kd: f64, torque_limit: f64) -> Result<Self> {
        let g = Self {
            kp,
            kd,
            torque_limit,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kp > 0.0 && self.kd > 0.0 && self.torque_limit > 0.0) {
            return Err(Error::invalid(format!("PD gains must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// `τ = clamp(kp·(q_target − q) − kd·q̇, ±torque_limit)` per joint.
pub fn pd_torque(gains: &PdGains, q_target: &[f64], q: &[f64], q_dot: &[f64]) -> Result<Vec<f64>> {
    if q_target.len() != q.len() || q.len() != q_dot.len() {
        return Err(Error::ShapeMismatch {
            op: "pd_torque",
            expected: format!("{} joints", q_target.len()),
            actual: format!("q: {}, q_dot: {}", q.len(), q_dot.len()),
        });
    }
    Ok(q_target
        .iter()
        .zip(q)
        .zip(q_dot)
        .map(|((&t, &p), &v)| pd_torque_single(gains, t - p, v))
        .collect())
}

/// Single-joint PD law given the position error directly.
pub(crate) fn pd_torque_single(gains: &PdGains, error: f64, q_dot: f64) -> f64 {
    (gains.kp * error - gains.kd * q_dot).clamp(-gains.torque_limit, gains.torque_limit)
}

/// `q_default + η·clamp(action, −1, 1)`. Actions are clamped before scaling.
pub fn action_to_target(action: &[f64], eta: f64, q_default: &[f64]) -> Vec<f64> {
    action
        .iter()
        .zip(q_default)
        .map(|(&a, &d)| d + eta * a.clamp(-1.0, 1.0))
        .collect()
}
