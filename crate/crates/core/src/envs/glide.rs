//! Planar point mass with drag: the walking analog.
//!
//! A fixed contact clock stands in for foot strikes. Objective 1 rewards
//! resisting lateral pushes, objective 2 rewards long displacement between
//! contacts.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::disturbance::{DisturbanceConfig, DisturbanceSchedule};
use super::{ObservationFrame, StepInfo, StepResult, StepRewards};
use crate::error::{Error, Result};
use crate::preference::PreferenceVector;
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlideConfig {
    pub dt: f64,
    pub horizon: usize,
    pub accel_max: f64,
    pub drag: f64,
    pub command: [f64; 2],
    pub contact_period: usize,
    pub eta: f64,
    pub alive_bonus: f64,
    pub max_lateral: f64,
    pub disturbance: DisturbanceConfig,
}

impl Default for GlideConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            horizon: 500,
            accel_max: 2.0,
            drag: 0.5,
            command: [1.0, 0.0],
            contact_period: 25,
            eta: 0.5,
            alive_bonus: 0.1,
            max_lateral: 3.0,
            disturbance: DisturbanceConfig::default(),
        }
    }
}

impl GlideConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.accel_max > 0.0 && self.drag >= 0.0 && self.max_lateral > 0.0) {
            return Err(Error::invalid("glide physical constants must be positive"));
        }
        if self.contact_period == 0 || self.horizon == 0 {
            return Err(Error::invalid("contact period and horizon must be positive"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::invalid("eta must lie in (0, 1]"));
        }
        super::validate_disturbance(&self.disturbance)
    }
}

/// Scales `v` down to norm `max` if it is longer.
pub fn clamp_to_norm(v: [f64; 2], max: f64) -> [f64; 2] {
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    if n > max {
        [v[0] * max / n, v[1] * max / n]
    } else {
        v
    }
}

fn norm(v: [f64; 2]) -> f64 {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

#[derive(Debug, Clone)]
pub struct Glide {
    pub config: GlideConfig,
    pos: [f64; 2],
    vel: [f64; 2],
    last_contact: [f64; 2],
    step: usize,
    prev_action: [f64; 2],
    preference: PreferenceVector,
    schedule: DisturbanceSchedule,
    pos_pre: [f64; 2],
    rng: RngStream,
}

impl Glide {
    pub fn new(config: GlideConfig, rng: RngStream) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            pos: [0.0; 2],
            vel: [0.0; 2],
            last_contact: [0.0; 2],
            step: 0,
            prev_action: [0.0; 2],
            preference: PreferenceVector::balanced(),
            schedule: DisturbanceSchedule::default(),
            pos_pre: [0.0; 2],
            rng,
        })
    }

    pub fn reset(&mut self, preference: PreferenceVector) -> ObservationFrame {
        self.pos = [0.0; 2];
        self.vel = [0.0; 2];
        self.last_contact = [0.0; 2];
        self.step = 0;
        self.prev_action = [0.0; 2];
        self.preference = preference;
        self.schedule.reset();
        self.schedule.arm(0, &self.config.disturbance, &mut self.rng);
        self.observation()
    }

    pub fn set_preference(&mut self, preference: PreferenceVector) {
        self.preference = preference;
    }

    pub fn preference(&self) -> PreferenceVector {
        self.preference
    }

    pub fn position(&self) -> [f64; 2] {
        self.pos
    }

    pub fn velocity(&self) -> [f64; 2] {
        self.vel
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    pub fn set_velocity(&mut self, v: [f64; 2]) {
        self.vel = v;
    }

    pub fn disturbance_active(&self) -> bool {
        self.step > 0 && self.schedule.active(self.step - 1).is_some()
    }

    /// `[p_x, p_y, v_x, v_y, last_contact_x, last_contact_y, disturbance marker]`
    pub fn render_state(&self) -> Vec<f64> {
        vec![
            self.pos[0],
            self.pos[1],
            self.vel[0],
            self.vel[1],
            self.last_contact[0],
            self.last_contact[1],
            if self.disturbance_active() { 1.0 } else { 0.0 },
        ]
    }

    fn phase(&self) -> f64 {
        TAU * (self.step % self.config.contact_period) as f64 / self.config.contact_period as f64
    }

    pub fn observation(&self) -> ObservationFrame {
        let phase = self.phase();
        ObservationFrame {
            proprio: vec![
                self.vel[0] / 3.0,
                self.vel[1] / 3.0,
                self.pos[1],
                phase.sin(),
                phase.cos(),
            ],
            prev_action: self.prev_action.to_vec(),
            eta: self.config.eta,
            command: Some(self.config.command.to_vec()),
            preference: self.preference,
        }
    }

    /// Advances the dynamics under an explicit acceleration command (already
    /// norm-limited by the caller).
    pub fn integrate(&mut self, accel: [f64; 2]) {
        let c = &self.config;
        for ((v, p), a) in self.vel.iter_mut().zip(&mut self.pos).zip(accel) {
            *v += (a - c.drag * *v) * c.dt;
            *p += *v * c.dt;
        }
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if action.len() != 2 {
            return Err(Error::ShapeMismatch {
                op: "glide step",
                expected: "2 actions".into(),
                actual: format!("{}", action.len()),
            });
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("non-finite action"));
        }
        let t = self.step;
        let disturbance = self.config.disturbance.clone();
        if let Some(event) =
            self.schedule
                .inject(t, &disturbance, &mut self.rng, |sign| vec![0.0, sign])
        {
            self.pos_pre = self.pos;
            self.vel[0] += event.direction[0] * event.magnitude;
            self.vel[1] += event.direction[1] * event.magnitude;
        }

        let c = self.config.clone();
        let accel = clamp_to_norm([action[0] * c.accel_max, action[1] * c.accel_max], c.accel_max);
        self.integrate(accel);
        self.prev_action = [action[0].clamp(-1.0, 1.0), action[1].clamp(-1.0, 1.0)];
        self.step += 1;

        let contact = self.step.is_multiple_of(c.contact_period);
        let stride = if contact {
            let s = norm([self.pos[0] - self.last_contact[0], self.pos[1] - self.last_contact[1]]);
            self.last_contact = self.pos;
            s
        } else {
            0.0
        };
        let (r_disturb, com_displacement) = match self.schedule.active(t) {
            Some(event) => {
                let disp = norm([self.pos[0] - self.pos_pre[0], self.pos[1] - self.pos_pre[1]]);
                let along = self.vel[0] * event.direction[0] + self.vel[1] * event.direction[1];
                (-disp - along.abs(), disp)
            }
            None => (0.0, 0.0),
        };
        let dv = [self.vel[0] - c.command[0], self.vel[1] - c.command[1]];
        let task = -(dv[0] * dv[0] + dv[1] * dv[1]) + c.alive_bonus;

        let terminated = self.pos[1].abs() > c.max_lateral;
        let done = terminated || self.step >= c.horizon;
        let energy = (accel[0] * self.vel[0]).abs() * c.dt + (accel[1] * self.vel[1]).abs() * c.dt;

        Ok(StepResult {
            observation: self.observation(),
            rewards: StepRewards {
                task,
                obj1: r_disturb,
                obj2: stride,
            },
            done,
            terminated,
            info: StepInfo {
                success: !terminated,
                com_displacement,
                stride,
                traj_deviation: self.pos[1].abs(),
                energy,
                torque_abs: norm(accel),
                contact,
                in_disturbance: self.schedule.active(t).is_some(),
            },
        })
    }

    /// Scripted velocity tracker with lateral damping; returns an action.
    pub fn scripted_action(&self) -> [f64; 2] {
        let c = &self.config;
        let ax = (c.drag * c.command[0] + 2.0 * (c.command[0] - self.vel[0])) / c.accel_max;
        let ay = (-3.0 * self.vel[1] - 1.0 * self.pos[1]) / c.accel_max;
        [ax.clamp(-1.0, 1.0), ay.clamp(-1.0, 1.0)]
    }
}
