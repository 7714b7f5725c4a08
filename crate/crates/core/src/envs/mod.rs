//! Deterministic two-objective control environments.
//!
//! | env       | obj1                    | obj2                   |
//! |-----------|-------------------------|------------------------|
//! | `upright` | energy efficiency       | disturbance resistance |
//! | `glide`   | disturbance resistance  | stride length          |
//!
//! Observations are laid out as `[proprio, prev_action, eta, command?,
//! preference]`; policies consume the current frame stacked with the
//! previous [`HISTORY_LEN`] frames.

pub mod disturbance;
pub mod glide;
pub mod pd;
pub mod upright;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use disturbance::{DisturbanceConfig, DisturbanceEvent, DisturbanceSchedule};
pub use glide::{Glide, GlideConfig};
pub use pd::{action_to_target, pd_torque, PdGains};
pub use upright::{wrap_angle, TargetMode, Upright, UprightConfig};

use crate::error::{Error, Result};
use crate::preference::PreferenceVector;
use crate::rng::RngStream;

/// Number of past frames stacked with the current one.
pub const HISTORY_LEN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvName {
    Upright,
    Glide,
}

impl EnvName {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvName::Upright => "upright",
            EnvName::Glide => "glide",
        }
    }
}

impl fmt::Display for EnvName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upright" => Ok(EnvName::Upright),
            "glide" => Ok(EnvName::Glide),
            other => Err(Error::invalid(format!(
                "unknown environment `{other}` (expected upright or glide)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: EnvName,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub dt: f64,
    pub horizon: usize,
    pub history_len: usize,
}

impl EnvSpec {
    /// Width of the stacked observation fed to encoders and critics.
    pub fn stacked_dim(&self) -> usize {
        (self.history_len + 1) * self.obs_dim
    }
}

/// Per-environment parameters, as stored in run configs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvParams {
    pub upright: UprightConfig,
    pub glide: GlideConfig,
}

impl EnvParams {
    pub fn spec(&self, name: EnvName) -> EnvSpec {
        match name {
            EnvName::Upright => EnvSpec {
                name,
                obs_dim: 3 + 1 + 1 + 2,
                act_dim: 1,
                dt: self.upright.dt,
                horizon: self.upright.horizon,
                history_len: HISTORY_LEN,
            },
            EnvName::Glide => EnvSpec {
                name,
                obs_dim: 5 + 2 + 1 + 2 + 2,
                act_dim: 2,
                dt: self.glide.dt,
                horizon: self.glide.horizon,
                history_len: HISTORY_LEN,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.upright.validate()?;
        self.glide.validate()
    }

    /// Copy with disturbance injection switched on or off in both envs.
    pub fn with_disturbances(&self, enabled: bool) -> Self {
        let mut p = self.clone();
        p.upright.disturbance.enabled = enabled;
        p.glide.disturbance.enabled = enabled;
        p
    }
}

pub(crate) fn validate_disturbance(d: &DisturbanceConfig) -> Result<()> {
    if d.window == 0 || d.interval_min == 0 || d.interval_min > d.interval_max {
        return Err(Error::invalid("disturbance intervals and window must be positive and ordered"));
    }
    if d.interval_min <= d.window {
        return Err(Error::invalid("disturbance interval must exceed the reward window"));
    }
    if !(d.magnitude_min >= 0.0 && d.magnitude_min <= d.magnitude_max) {
        return Err(Error::invalid("disturbance magnitudes must be ordered and non-negative"));
    }
    Ok(())
}

/// One observation frame, kept structured until it is flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationFrame {
    pub proprio: Vec<f64>,
    pub prev_action: Vec<f64>,
    pub eta: f64,
    pub command: Option<Vec<f64>>,
    pub preference: PreferenceVector,
}

impl ObservationFrame {
    /// `[proprio, prev_action, eta, command?, preference]`
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.proprio.len() + 8);
        v.extend_from_slice(&self.proprio);
        v.extend_from_slice(&self.prev_action);
        v.push(self.eta);
        if let Some(cmd) = &self.command {
            v.extend_from_slice(cmd);
        }
        v.extend_from_slice(&self.preference.weights());
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepRewards {
    pub task: f64,
    pub obj1: f64,
    pub obj2: f64,
}

/// Raw physical quantities measured during a step (not reward-weighted).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepInfo {
    pub success: bool,
    pub com_displacement: f64,
    pub stride: f64,
    pub traj_deviation: f64,
    pub energy: f64,
    pub torque_abs: f64,
    pub contact: bool,
    pub in_disturbance: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: ObservationFrame,
    pub rewards: StepRewards,
    pub done: bool,
    /// Ended by a failure condition rather than the horizon.
    pub terminated: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone)]
pub enum Environment {
    Upright(Upright),
    Glide(Glide),
}

impl Environment {
    pub fn new(name: EnvName, params: &EnvParams, rng: RngStream) -> Result<Self> {
        Ok(match name {
            EnvName::Upright => Environment::Upright(Upright::new(params.upright.clone(), rng)?),
            EnvName::Glide => Environment::Glide(Glide::new(params.glide.clone(), rng)?),
        })
    }

    pub fn name(&self) -> EnvName {
        match self {
            Environment::Upright(_) => EnvName::Upright,
            Environment::Glide(_) => EnvName::Glide,
        }
    }

    pub fn dt(&self) -> f64 {
        match self {
            Environment::Upright(e) => e.config.dt,
            Environment::Glide(e) => e.config.dt,
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            Environment::Upright(e) => e.config.horizon,
            Environment::Glide(e) => e.config.horizon,
        }
    }

    pub fn reset(&mut self, preference: PreferenceVector) -> ObservationFrame {
        match self {
            Environment::Upright(e) => e.reset(preference),
            Environment::Glide(e) => e.reset(preference),
        }
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        match self {
            Environment::Upright(e) => e.step(action),
            Environment::Glide(e) => e.step(action),
        }
    }

    /// Changes the preference shown in subsequent observations.
    pub fn set_preference(&mut self, preference: PreferenceVector) {
        match self {
            Environment::Upright(e) => e.set_preference(preference),
            Environment::Glide(e) => e.set_preference(preference),
        }
    }

    pub fn preference(&self) -> PreferenceVector {
        match self {
            Environment::Upright(e) => e.preference(),
            Environment::Glide(e) => e.preference(),
        }
    }

    pub fn observation(&self) -> ObservationFrame {
        match self {
            Environment::Upright(e) => e.observation(),
            Environment::Glide(e) => e.observation(),
        }
    }

    pub fn render_state(&self) -> Vec<f64> {
        match self {
            Environment::Upright(e) => e.render_state(),
            Environment::Glide(e) => e.render_state(),
        }
    }

    pub fn step_count(&self) -> usize {
        match self {
            Environment::Upright(e) => e.step_count(),
            Environment::Glide(e) => e.step_count(),
        }
    }

    /// Per-frame state seen by the style discriminator: the wrapped angle
    /// for upright, the planar velocity for glide.
    pub fn amp_state(&self) -> Vec<f64> {
        match self {
            Environment::Upright(e) => vec![upright::wrap_angle(e.theta())],
            Environment::Glide(e) => e.velocity().to_vec(),
        }
    }
}

/// Width of [`Environment::amp_state`].
pub fn amp_state_dim(name: EnvName) -> usize {
    match name {
        EnvName::Upright => 1,
        EnvName::Glide => 2,
    }
}

/// Per-episode accumulator of rewards and environment metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub task_return: f64,
    pub obj1_return: f64,
    pub obj2_return: f64,
    pub length: usize,
    pub success: bool,
    pub terminated: bool,
    /// Sum of per-step actuation energy.
    pub energy: f64,
    pub com_displacement: f64,
    pub stride_total: f64,
    pub contacts: usize,
    pub deviation_total: f64,
}

impl EpisodeStats {
    pub fn record(&mut self, step: &StepResult) {
        self.task_return += step.rewards.task;
        self.obj1_return += step.rewards.obj1;
        self.obj2_return += step.rewards.obj2;
        self.length += 1;
        self.success = step.info.success;
        self.terminated = step.terminated;
        self.energy += step.info.energy;
        self.com_displacement += step.info.com_displacement;
        if step.info.contact {
            self.stride_total += step.info.stride;
            self.contacts += 1;
        }
        self.deviation_total += step.info.traj_deviation;
    }

    /// Mean stride length over contact events.
    pub fn avg_stride(&self) -> f64 {
        if self.contacts == 0 {
            0.0
        } else {
            self.stride_total / self.contacts as f64
        }
    }

    /// Mean per-step lateral deviation.
    pub fn traj_deviation(&self) -> f64 {
        if self.length == 0 {
            0.0
        } else {
            self.deviation_total / self.length as f64
        }
    }
}

/// Rolling stack of the last `history_len + 1` flattened frames, oldest first.
#[derive(Debug, Clone)]
pub struct History {
    frames: VecDeque<Vec<f64>>,
    capacity: usize,
}

impl History {
    /// Fills every slot with `initial`.
    pub fn new(history_len: usize, initial: &ObservationFrame) -> Self {
        let frame = initial.to_vec();
        let capacity = history_len + 1;
        Self {
            frames: std::iter::repeat_n(frame, capacity).collect(),
            capacity,
        }
    }

    pub fn reset(&mut self, initial: &ObservationFrame) {
        let frame = initial.to_vec();
        for f in self.frames.iter_mut() {
            f.clone_from(&frame);
        }
    }

    pub fn push(&mut self, frame: &ObservationFrame) {
        if self.frames.len() == self.capacity {
            self.frames.pop_front();
        }
        self.frames.push_back(frame.to_vec());
    }

    pub fn current(&self) -> &[f64] {
        self.frames.back().expect("history is never empty")
    }

    /// Oldest-to-newest concatenation.
    pub fn stacked(&self) -> Vec<f64> {
        self.frames.iter().flatten().copied().collect()
    }

    /// Replaces the preference tail of every stored frame.
    pub fn overwrite_preference(&mut self, preference: PreferenceVector) {
        let w = preference.weights();
        for f in self.frames.iter_mut() {
            let n = f.len();
            f[n - 2] = w[0];
            f[n - 1] = w[1];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn obs_dims_match_layout() {
        let p = EnvParams::default();
        assert_eq!(p.spec(EnvName::Upright).obs_dim, 7);
        assert_eq!(p.spec(EnvName::Glide).obs_dim, 12);
        assert_eq!(p.spec(EnvName::Upright).stacked_dim(), 42);
        for name in [EnvName::Upright, EnvName::Glide] {
            let mut env = Environment::new(name, &p, RngStream::new(1)).unwrap();
            let obs = env.reset(PreferenceVector::balanced());
            assert_eq!(obs.to_vec().len(), p.spec(name).obs_dim);
            let spec = p.spec(name);
            assert_eq!(1.0 / spec.dt, 50.0);
            assert_eq!(spec.history_len, 5);
        }
    }

    #[test]
    fn history_stacks_oldest_first() {
        let mut env = Environment::new(EnvName::Upright, &EnvParams::default(), RngStream::new(1)).unwrap();
        let first = env.reset(PreferenceVector::balanced());
        let mut h = History::new(HISTORY_LEN, &first);
        assert_eq!(h.stacked().len(), 42);
        let r = env.step(&[0.3]).unwrap();
        h.push(&r.observation);
        let s = h.stacked();
        assert_eq!(&s[35..], r.observation.to_vec().as_slice());
        assert_eq!(&s[..7], first.to_vec().as_slice());
        assert_eq!(h.current(), r.observation.to_vec().as_slice());
    }

    #[test]
    fn env_name_parsing() {
        assert_eq!("glide".parse::<EnvName>().unwrap(), EnvName::Glide);
        assert!("walker".parse::<EnvName>().is_err());
    }

    fn run_invariants(name: EnvName, seed: u64) {
        let params = EnvParams::default();
        let mut env = Environment::new(name, &params, RngStream::new(seed)).unwrap();
        let mut rng = RngStream::new(seed ^ 0xFF);
        env.reset(PreferenceVector::balanced());
        let mut steps = 0;
        loop {
            let act: Vec<f64> = (0..params.spec(name).act_dim)
                .map(|_| rng.uniform_range(-1.5, 1.5))
                .collect();
            let r = env.step(&act).unwrap();
            steps += 1;
            let rw = r.rewards;
            assert!(rw.task.is_finite() && rw.obj1.is_finite() && rw.obj2.is_finite());
            match name {
                EnvName::Upright => {
                    assert!(rw.obj1 <= 0.0);
                    assert!(rw.obj2 <= 0.0);
                    if !r.info.in_disturbance {
                        assert_eq!(rw.obj2, 0.0);
                    }
                }
                EnvName::Glide => {
                    assert!(rw.obj2 >= 0.0);
                    if !r.info.contact {
                        assert_eq!(rw.obj2, 0.0);
                    }
                    assert!(rw.obj1 <= 0.0);
                    if !r.info.in_disturbance {
                        assert_eq!(rw.obj1, 0.0);
                    }
                }
            }
            if r.done {
                if !r.terminated {
                    assert_eq!(steps, params.spec(name).horizon);
                }
                break;
            }
        }
    }

    #[test]
    fn reward_sign_and_indicator_invariants() {
        for seed in 0..10 {
            run_invariants(EnvName::Upright, seed);
            run_invariants(EnvName::Glide, seed);
        }
    }
}
