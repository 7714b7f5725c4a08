//! Optional style reward from a least-squares discriminator trained to tell
//! scripted reference motion from policy motion.

mod discriminator;
mod reference;

pub use discriminator::{build_disc_loss, style_reward, DiscLossNodes, DiscStats, Discriminator};
pub use reference::{generate_reference, ReferenceDataset, ReferenceMeta};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frames per discriminator window.
pub const AMP_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmpConfig {
    /// Style reward scale `c`.
    pub reward_scale: f64,
    /// Gradient-penalty weight.
    pub penalty_weight: f64,
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    /// Windows drawn from each side per discriminator step.
    pub batch_size: usize,
    pub steps_per_iter: usize,
    pub reference_episodes: usize,
}

impl Default for AmpConfig {
    fn default() -> Self {
        Self {
            reward_scale: 0.5,
            penalty_weight: 10.0,
            hidden: vec![64, 64],
            learning_rate: 3e-4,
            batch_size: 256,
            steps_per_iter: 5,
            reference_episodes: 4,
        }
    }
}

impl AmpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.reward_scale > 0.0) {
            return Err(Error::invalid("amp.reward_scale must be positive"));
        }
        if !(self.penalty_weight >= 0.0) {
            return Err(Error::invalid("amp.penalty_weight must be non-negative"));
        }
        if self.hidden.contains(&0) || self.batch_size == 0 || self.reference_episodes == 0 {
            return Err(Error::invalid("amp sizes must be positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("amp.learning_rate must be positive"));
        }
        Ok(())
    }
}
