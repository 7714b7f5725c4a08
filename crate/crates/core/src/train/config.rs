use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::preference::PreferenceVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub n_envs: usize,
    /// Steps collected per environment each iteration.
    pub horizon: usize,
    pub iterations: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub epochs_per_iter: usize,
    pub minibatches: usize,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub dirichlet_conc: [f64; 2],
    /// Share of sampled episodes pinned to a simplex vertex, split evenly
    /// between (1, 0) and (0, 1). The rest come from the Dirichlet.
    pub vertex_prob: f64,
    pub ablation_gate: bool,
    pub amp_enabled: bool,
    /// Pins every episode to this preference instead of sampling.
    pub fixed_preference: Option<PreferenceVector>,
    /// A checkpoint is written every this many iterations (0: only at the end).
    pub checkpoint_every: usize,
    /// Each minibatch gradient is accumulated over this many slices, which
    /// may be evaluated in parallel. Fixed so results do not depend on the
    /// thread count.
    pub grad_chunks: usize,
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_envs: 64,
            horizon: 500,
            iterations: 300,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            epochs_per_iter: 5,
            minibatches: 4,
            learning_rate: 3e-4,
            entropy_coef: 0.005,
            value_coef: 0.5,
            max_grad_norm: 1.0,
            dirichlet_conc: [1.0, 1.0],
            vertex_prob: 0.2,
            ablation_gate: false,
            amp_enabled: false,
            fixed_preference: None,
            checkpoint_every: 50,
            grad_chunks: 8,
            execution: Execution::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, why: &str| Err(Error::invalid(format!("train.{field}: {why}")));
        if self.n_envs == 0 {
            return fail("n_envs", "must be positive");
        }
        if self.horizon == 0 {
            return fail("horizon", "must be positive");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail("gamma", "must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return fail("gae_lambda", "must lie in [0, 1]");
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return fail("clip_eps", "must lie in (0, 1)");
        }
        if self.epochs_per_iter == 0 {
            return fail("epochs_per_iter", "must be positive");
        }
        if self.minibatches == 0 || self.minibatches > self.n_envs * self.horizon {
            return fail("minibatches", "must be between 1 and the batch size");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate", "must be positive");
        }
        if !(self.entropy_coef >= 0.0 && self.value_coef >= 0.0) {
            return fail("entropy_coef", "coefficients must be non-negative");
        }
        if !(self.max_grad_norm > 0.0) {
            return fail("max_grad_norm", "must be positive");
        }
        if !self.dirichlet_conc.iter().all(|&a| a > 0.0 && a.is_finite()) {
            return fail("dirichlet_conc", "concentrations must be positive");
        }
        if !(0.0..=1.0).contains(&self.vertex_prob) {
            return fail("vertex_prob", "must lie in [0, 1]");
        }
        if self.grad_chunks == 0 {
            return fail("grad_chunks", "must be positive");
        }
        Ok(())
    }
}
