//! Randomized push disturbances and their reward windows.

use serde::{Deserialize, Serialize};

use crate::rng::RngStream;

/// An impulse applied at `step_applied`; its reward window covers steps
/// `step_applied .. step_applied + window`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceEvent {
    pub step_applied: usize,
    /// Unit vector (1-D for the pendulum, 2-D for the point mass).
    pub direction: Vec<f64>,
    pub magnitude: f64,
    pub window: usize,
}

impl DisturbanceEvent {
    pub fn in_window(&self, step: usize) -> bool {
        step >= self.step_applied && step < self.step_applied + self.window
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DisturbanceConfig {
    pub enabled: bool,
    pub interval_min: usize,
    pub interval_max: usize,
    pub window: usize,
    pub magnitude_min: f64,
    pub magnitude_max: f64,
}

impl Default for DisturbanceConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            interval_min: 100,
            interval_max: 200,
            window: 25,
            magnitude_min: 0.5,
            magnitude_max: 1.0,
        }
    }
}

/// Event clock: once armed, fires after a uniform `[interval_min,
/// interval_max]` delay measured from the arming step or the previous event.
#[derive(Debug, Clone, Default)]
pub struct DisturbanceSchedule {
    next_step: Option<usize>,
    active: Option<DisturbanceEvent>,
}

impl DisturbanceSchedule {
    pub fn reset(&mut self) {
        *self = Self::default();
    }

    pub fn is_armed(&self) -> bool {
        self.next_step.is_some()
    }

    /// Starts the clock at `step` if it is not already running.
    pub fn arm(&mut self, step: usize, config: &DisturbanceConfig, rng: &mut RngStream) {
        if config.enabled && self.next_step.is_none() {
            self.next_step = Some(step + rng.int_range(config.interval_min, config.interval_max));
        }
    }

    /// Returns a new event when the clock fires at `step`. The direction is
    /// built by `direction` from a random sign.
    pub fn inject(
        &mut self,
        step: usize,
        config: &DisturbanceConfig,
        rng: &mut RngStream,
        direction: impl FnOnce(f64) -> Vec<f64>,
    ) -> Option<DisturbanceEvent> {
        if !config.enabled || self.next_step != Some(step) {
            return None;
        }
        let sign = rng.sign();
        let magnitude = rng.uniform_range(config.magnitude_min, config.magnitude_max);
        let event = DisturbanceEvent {
            step_applied: step,
            direction: direction(sign),
            magnitude,
            window: config.window,
        };
        self.next_step = Some(step + rng.int_range(config.interval_min, config.interval_max));
        self.active = Some(event.clone());
        Some(event)
    }

    /// The event whose window contains `step`, if any.
    pub fn active(&self, step: usize) -> Option<&DisturbanceEvent> {
        self.active.as_ref().filter(|e| e.in_window(step))
    }
}
