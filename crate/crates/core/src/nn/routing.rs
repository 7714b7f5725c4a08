//! Preference-parameterized Beta routing over experts at fixed positions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preference::PreferenceVector;

pub const EXPERT_COUNT: usize = 5;

/// `α = α0 + λ1·s`, `β = β0 + λ2·s`; experts sit at fixed positions in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaRouting {
    pub positions: [f64; EXPERT_COUNT],
    pub alpha0: f64,
    pub beta0: f64,
    pub scale: f64,
}

impl Default for BetaRouting {
    fn default() -> Self {
        Self {
            positions: [0.0, 0.25, 0.5, 0.75, 1.0],
            alpha0: 1.0,
            beta0: 1.0,
            scale: 5.0,
        }
    }
}

impl BetaRouting {
    pub fn validate(&self) -> Result<()> {
        if self.alpha0 != self.beta0 || self.alpha0 < 1.0 {
            return Err(Error::invalid("Beta offsets must satisfy alpha0 = beta0 >= 1"));
        }
        if !(self.scale.is_finite() && self.scale >= 0.0) {
            return Err(Error::invalid("Beta scale must be finite and non-negative"));
        }
        let p = &self.positions;
        let increasing = p.windows(2).all(|w| w[0] < w[1]);
        let in_range = p.iter().all(|x| (0.0..=1.0).contains(x));
        let symmetric = (0..EXPERT_COUNT).all(|j| p[j] + p[EXPERT_COUNT - 1 - j] == 1.0);
        if !(increasing && in_range && symmetric) {
            return Err(Error::invalid(
                "expert positions must be strictly increasing in [0, 1] and symmetric about 0.5",
            ));
        }
        Ok(())
    }

    pub fn alpha_beta(&self, preference: PreferenceVector) -> (f64, f64) {
        (
            self.alpha0 + preference.first() * self.scale,
            self.beta0 + preference.second() * self.scale,
        )
    }
}

// x^e in log space, with 0^0 = 1
fn log_pow(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        0.0
    } else {
        e * x.ln()
    }
}

/// Normalized routing weights: the Beta kernel `x^(α−1)·(1−x)^(β−1)`
/// evaluated at each expert position, divided by its sum. The Beta-function
/// normalizer cancels and is never computed.
///
/// Evaluated in log space so large scales do not underflow, and summed in
/// mirror-paired order so that swapping the preference reverses the weights
/// bit for bit.
pub fn beta_routing_weights(preference: PreferenceVector, routing: &BetaRouting) -> [f64; EXPERT_COUNT] {
    let (alpha, beta) = routing.alpha_beta(preference);
    let mut logs = [0.0; EXPERT_COUNT];
    for (l, &x) in logs.iter_mut().zip(&routing.positions) {
        *l = log_pow(x, alpha - 1.0) + log_pow(1.0 - x, beta - 1.0);
    }
    let max = logs.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut w = logs.map(|l| (l - max).exp());
    let mut total = 0.0;
    for j in 0..EXPERT_COUNT / 2 {
        total += w[j] + w[EXPERT_COUNT - 1 - j];
    }
    if EXPERT_COUNT % 2 == 1 {
        total += w[EXPERT_COUNT / 2];
    }
    w.iter_mut().for_each(|v| *v /= total);
    w
}
