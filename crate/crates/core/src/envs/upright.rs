//! Torque-limited pendulum swing-up: the fall-recovery analog.
//!
//! The pendulum starts hanging (`θ = π`) and must be pumped up to the upright
//! pose (`θ = 0`) through a saturated PD loop. Objective 1 rewards low
//! actuation energy, objective 2 rewards resisting velocity pushes that start
//! once the pendulum has first reached the upright pose.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::disturbance::{DisturbanceConfig, DisturbanceSchedule};
use super::pd::{action_to_target, pd_torque_single, PdGains};
use super::{ObservationFrame, StepInfo, StepResult, StepRewards};
use crate::error::{Error, Result};
use crate::preference::PreferenceVector;
use crate::rng::RngStream;

/// What the PD target is measured from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// `θ_default + η·s·a`. On a freely rotating joint the wrapped error
    /// makes torque a sign flip of the action near the hanging pose.
    Absolute,
    /// `θ + η·s·a`: the action offsets the target from the current angle,
    /// so torque is continuous in the action everywhere.
    Relative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UprightConfig {
    pub mass: f64,
    pub length: f64,
    pub gravity: f64,
    pub damping: f64,
    pub dt: f64,
    pub horizon: usize,
    pub gains: PdGains,
    pub eta: f64,
    pub theta_default: f64,
    pub target_mode: TargetMode,
    /// Radians of PD target per unit of `η·a`.
    pub target_scale: f64,
    pub kappa_tau: f64,
    pub kappa_p: f64,
    pub success_threshold: f64,
    pub success_hold: usize,
    pub max_speed: f64,
    pub disturbance: DisturbanceConfig,
}

impl Default for UprightConfig {
    fn default() -> Self {
        Self {
            mass: 1.0,
            length: 1.0,
            gravity: 9.81,
            damping: 0.1,
            dt: 0.02,
            horizon: 500,
            gains: PdGains {
                kp: 8.0,
                kd: 1.0,
                torque_limit: 5.0,
            },
            eta: 0.5,
            theta_default: 0.0,
            target_mode: TargetMode::Relative,
            target_scale: 2.5,
            kappa_tau: 0.01,
            kappa_p: 0.005,
            success_threshold: 0.25,
            success_hold: 50,
            max_speed: 20.0,
            disturbance: DisturbanceConfig {
                magnitude_min: 0.8,
                magnitude_max: 1.5,
                ..DisturbanceConfig::default()
            },
        }
    }
}

impl UprightConfig {
    pub fn validate(&self) -> Result<()> {
        self.gains.validate()?;
        let positive = [self.mass, self.length, self.gravity, self.dt, self.target_scale];
        if positive.iter().any(|v| !(*v > 0.0)) || self.damping < 0.0 {
            return Err(Error::invalid("upright physical constants must be positive"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::invalid("eta must lie in (0, 1]"));
        }
        if self.kappa_tau <= 0.0 || self.kappa_p <= 0.0 {
            return Err(Error::invalid("energy coefficients must be positive"));
        }
        if self.horizon == 0 {
            return Err(Error::invalid("horizon must be positive"));
        }
        super::validate_disturbance(&self.disturbance)
    }
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

#[derive(Debug, Clone)]
pub struct Upright {
    pub config: UprightConfig,
    theta: f64,
    theta_dot: f64,
    step: usize,
    last_torque: f64,
    prev_action: f64,
    upright_streak: usize,
    preference: PreferenceVector,
    schedule: DisturbanceSchedule,
    theta_pre: f64,
    rng: RngStream,
}

impl Upright {
    pub fn new(config: UprightConfig, rng: RngStream) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            theta: PI,
            theta_dot: 0.0,
            step: 0,
            last_torque: 0.0,
            prev_action: 0.0,
            upright_streak: 0,
            preference: PreferenceVector::balanced(),
            schedule: DisturbanceSchedule::default(),
            theta_pre: 0.0,
            rng,
        })
    }

    pub fn reset(&mut self, preference: PreferenceVector) -> ObservationFrame {
        self.theta = PI;
        self.theta_dot = 0.0;
        self.step = 0;
        self.last_torque = 0.0;
        self.prev_action = 0.0;
        self.upright_streak = 0;
        self.preference = preference;
        self.schedule.reset();
        self.observation()
    }

    pub fn set_preference(&mut self, preference: PreferenceVector) {
        self.preference = preference;
    }

    pub fn preference(&self) -> PreferenceVector {
        self.preference
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn theta_dot(&self) -> f64 {
        self.theta_dot
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    /// Overrides the joint state (tests and scripted controllers).
    pub fn set_state(&mut self, theta: f64, theta_dot: f64) {
        self.theta = theta;
        self.theta_dot = theta_dot;
    }

    /// `[θ, θ̇, last τ]`
    pub fn render_state(&self) -> Vec<f64> {
        vec![self.theta, self.theta_dot, self.last_torque]
    }

    pub fn disturbance_active(&self) -> bool {
        self.step > 0 && self.schedule.active(self.step - 1).is_some()
    }

    pub fn observation(&self) -> ObservationFrame {
        ObservationFrame {
            proprio: vec![
                self.theta.sin(),
                self.theta.cos(),
                self.theta_dot / 5.0,
            ],
            prev_action: vec![self.prev_action],
            eta: self.config.eta,
            command: None,
            preference: self.preference,
        }
    }

    /// Semi-implicit Euler step driven by an explicit joint torque.
    pub fn integrate(&mut self, torque: f64) {
        let c = &self.config;
        let inertia = c.mass * c.length * c.length;
        let acc = (c.gravity / c.length) * self.theta.sin() + torque / inertia
            - c.damping * self.theta_dot;
        self.theta_dot += acc * c.dt;
        self.theta += self.theta_dot * c.dt;
    }

    /// PD torque produced by `action` in the current state.
    pub fn torque_for(&self, action: f64) -> f64 {
        let c = &self.config;
        let base = match c.target_mode {
            TargetMode::Absolute => c.theta_default,
            TargetMode::Relative => self.theta,
        };
        let target = action_to_target(&[action], c.eta * c.target_scale, &[base])[0];
        pd_torque_single(&c.gains, wrap_angle(target - self.theta), self.theta_dot)
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if action.len() != 1 {
            return Err(Error::ShapeMismatch {
                op: "upright step",
                expected: "1 action".into(),
                actual: format!("{}", action.len()),
            });
        }
        if !action[0].is_finite() {
            return Err(Error::invalid("non-finite action"));
        }
        let t = self.step;
        let disturbance = self.config.disturbance.clone();
        if let Some(event) = self
            .schedule
            .inject(t, &disturbance, &mut self.rng, |sign| vec![sign])
        {
            self.theta_pre = self.theta;
            self.theta_dot += event.direction[0] * event.magnitude;
        }

        let torque = self.torque_for(action[0]);
        self.integrate(torque);
        self.last_torque = torque;
        self.prev_action = action[0].clamp(-1.0, 1.0);
        self.step += 1;

        let c = &self.config;
        let energy_rate = self.theta_dot.abs() * torque.abs();
        let r_energy = -c.kappa_tau * torque * torque - c.kappa_p * energy_rate;
        let (r_disturb, com_displacement) = match self.schedule.active(t) {
            Some(event) => {
                let disp = (self.theta - self.theta_pre).abs();
                (-disp - (self.theta_dot * event.direction[0]).abs(), disp)
            }
            None => (0.0, 0.0),
        };

        let upright = wrap_angle(self.theta).abs() < c.success_threshold;
        if upright {
            self.upright_streak += 1;
            self.schedule.arm(self.step, &disturbance, &mut self.rng);
        } else {
            self.upright_streak = 0;
        }
        let terminated = self.theta_dot.abs() > c.max_speed;
        let done = terminated || self.step >= c.horizon;

        Ok(StepResult {
            observation: self.observation(),
            rewards: StepRewards {
                task: self.theta.cos(),
                obj1: r_energy,
                obj2: r_disturb,
            },
            done,
            terminated,
            info: StepInfo {
                success: !terminated && self.upright_streak >= c.success_hold,
                com_displacement,
                stride: 0.0,
                traj_deviation: 0.0,
                energy: energy_rate * c.dt,
                torque_abs: torque.abs(),
                contact: false,
                in_disturbance: self.schedule.active(t).is_some(),
            },
        })
    }

    /// Scripted swing-up: bang-bang energy pumping (`τ = ±limit` along `θ̇`
    /// while the mechanical energy is below the upright energy) until
    /// `|θ| < 0.5`, then a stiff PD hold. Returns a joint torque.
    pub fn scripted_torque(&self) -> f64 {
        let c = &self.config;
        let limit = c.gains.torque_limit;
        let theta = wrap_angle(self.theta);
        if theta.abs() < 0.5 {
            return (-3.0 * c.gravity / c.length * theta - 6.0 * self.theta_dot).clamp(-limit, limit);
        }
        let energy = 0.5 * self.theta_dot * self.theta_dot + c.gravity / c.length * self.theta.cos();
        let deficit = c.gravity / c.length - energy;
        let s = self.theta_dot * deficit;
        if self.theta_dot == 0.0 {
            limit
        } else {
            limit * s.signum()
        }
    }
}
