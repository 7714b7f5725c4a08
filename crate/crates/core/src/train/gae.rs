use crate::error::{Error, Result};
use crate::preference::PreferenceVector;

/// Generalized advantage estimates and value targets for one trajectory
/// slice. A `done` step does not bootstrap from the step after it.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    bootstrap: f64,
    dones: &[bool],
    gamma: f64,
    lam: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(Error::ShapeMismatch {
            op: "compute_gae",
            expected: format!("{n} values and dones"),
            actual: format!("{} values, {} dones", values.len(), dones.len()),
        });
    }
    let mut adv = vec![0.0; n];
    let mut next_value = bootstrap;
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lam * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Shifts and scales `xs` in place to zero mean and unit (population)
/// standard deviation. Batches of one only get centered.
pub fn normalize(xs: &mut [f64]) {
    let n = xs.len();
    if n == 0 {
        return;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    xs.iter_mut().for_each(|x| *x -= mean);
    if n > 1 {
        let std = (xs.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
        if std > 1e-12 {
            xs.iter_mut().for_each(|x| *x /= std);
        }
    }
}

/// Normalized advantages of the three critics plus their value targets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdvantageRecord {
    pub adv_task: Vec<f64>,
    pub adv_obj1: Vec<f64>,
    pub adv_obj2: Vec<f64>,
    /// Value targets in [`crate::nn::CriticHead::ALL`] order.
    pub returns: [Vec<f64>; 3],
}

impl AdvantageRecord {
    pub fn len(&self) -> usize {
        self.adv_task.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adv_task.is_empty()
    }

    /// Preference-weighted advantage of transition `k`.
    pub fn combined(&self, k: usize, preference: PreferenceVector) -> f64 {
        preference_advantage(self.adv_task[k], self.adv_obj1[k], self.adv_obj2[k], preference)
    }
}

/// `λ1·Â_obj1 + λ2·Â_obj2 + Â_task`
pub fn preference_advantage(adv_task: f64, adv_obj1: f64, adv_obj2: f64, preference: PreferenceVector) -> f64 {
    preference.first() * adv_obj1 + preference.second() * adv_obj2 + adv_task
}
