//! The simulation side of the service: one controller, commands applied at
//! step boundaries.

use pcmorl_core::eval::Controller;
use pcmorl_core::preference::PreferenceVector;
use pcmorl_core::Result;

use crate::protocol::{ClientCommand, EpisodeFlags, StateFrame, StepMetrics};

/// Owns the live episode. Not shared: connections talk to it through a
/// command queue.
#[derive(Debug)]
pub struct Session {
    controller: Controller,
    dt: f64,
    speed: f64,
    paused: bool,
    pending_reset: bool,
}

impl Session {
    pub fn new(controller: Controller, dt: f64, speed: f64) -> Self {
        Self {
            controller,
            dt,
            speed,
            paused: false,
            pending_reset: false,
        }
    }

    pub fn paused(&self) -> bool {
        self.paused
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn preference(&self) -> PreferenceVector {
        self.controller.preference()
    }

    /// Wall-clock seconds between steps at the current speed.
    pub fn step_interval(&self) -> f64 {
        self.dt / self.speed
    }

    /// Applies a batch of commands received since the last step. Only the
    /// newest `set_pref` in the batch takes effect.
    pub fn apply_all(&mut self, commands: impl IntoIterator<Item = ClientCommand>) {
        let mut last_pref = None;
        for c in commands {
            match c {
                ClientCommand::SetPref(p) => last_pref = Some(p),
                other => self.apply(other),
            }
        }
        if let Some(p) = last_pref {
            self.apply(ClientCommand::SetPref(p));
        }
    }

    pub fn apply(&mut self, command: ClientCommand) {
        match command {
            ClientCommand::SetPref(p) => self.controller.set_preference(p),
            ClientCommand::Reset => self.pending_reset = true,
            ClientCommand::Pause => self.paused = true,
            ClientCommand::Resume => self.paused = false,
            ClientCommand::SetSpeed(s) => self.speed = s,
        }
    }

    /// Takes one step and describes it. A finished episode (or a requested
    /// reset) restarts before the next step.
    pub fn advance(&mut self) -> Result<StateFrame> {
        if self.pending_reset {
            self.controller.reset();
            self.pending_reset = false;
        }
        let lambda_applied = self.controller.preference().weights();
        let step = self.controller.step()?;
        let t = self.controller.step_count();
        self.pending_reset = step.done;
        Ok(StateFrame {
            t,
            sim_time: t as f64 * self.dt,
            lambda_applied,
            env_state: self.controller.render_state(),
            step_metrics: StepMetrics {
                task_r: step.rewards.task,
                obj1_r: step.rewards.obj1,
                obj2_r: step.rewards.obj2,
                energy: step.info.energy,
                stride: step.info.stride,
                deviation: step.info.traj_deviation,
            },
            episode_flags: EpisodeFlags {
                done: step.done,
                success: step.info.success,
            },
        })
    }
}
