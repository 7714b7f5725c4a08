//! Deterministic evaluation: preference sweeps and mid-episode preference
//! switches.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::envs::{EnvName, EnvParams, Environment, EpisodeStats, History, StepResult};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::nn::PolicyParams;
use crate::preference::PreferenceVector;
use crate::rng::RngStream;

/// Environment-specific columns of a sweep row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvMetrics {
    Upright {
        success_rate: f64,
        avg_energy: f64,
        com_displacement: f64,
    },
    Glide {
        avg_stride: f64,
        traj_deviation: f64,
    },
}

impl EnvMetrics {
    pub fn columns(env: EnvName) -> &'static [&'static str] {
        match env {
            EnvName::Upright => &["success_rate", "avg_energy", "com_displacement"],
            EnvName::Glide => &["avg_stride", "traj_deviation"],
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match *self {
            EnvMetrics::Upright {
                success_rate,
                avg_energy,
                com_displacement,
            } => vec![success_rate, avg_energy, com_displacement],
            EnvMetrics::Glide {
                avg_stride,
                traj_deviation,
            } => vec![avg_stride, traj_deviation],
        }
    }
}

/// Aggregate of one preference's evaluation episodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda1: f64,
    pub lambda2: f64,
    pub obj1_return: f64,
    pub obj2_return: f64,
    pub task_return: f64,
    #[serde(flatten)]
    pub metrics: EnvMetrics,
    pub episodes: usize,
}

impl SweepRow {
    pub fn columns(env: EnvName) -> Vec<&'static str> {
        let mut c = vec!["lambda1", "lambda2", "obj1_return", "obj2_return", "task_return"];
        c.extend_from_slice(EnvMetrics::columns(env));
        c.push("episodes");
        c
    }

    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![
            self.lambda1,
            self.lambda2,
            self.obj1_return,
            self.obj2_return,
            self.task_return,
        ];
        v.extend(self.metrics.values());
        v.push(self.episodes as f64);
        v
    }

    /// Averages per-episode statistics.
    pub fn aggregate(env: EnvName, preference: PreferenceVector, episodes: &[EpisodeStats]) -> Self {
        let n = episodes.len().max(1) as f64;
        let mean = |f: &dyn Fn(&EpisodeStats) -> f64| episodes.iter().map(f).sum::<f64>() / n;
        let metrics = match env {
            EnvName::Upright => EnvMetrics::Upright {
                success_rate: mean(&|e| if e.success { 1.0 } else { 0.0 }),
                avg_energy: mean(&|e| e.energy),
                com_displacement: mean(&|e| e.com_displacement),
            },
            EnvName::Glide => EnvMetrics::Glide {
                avg_stride: mean(&|e| e.avg_stride()),
                traj_deviation: mean(&|e| e.traj_deviation()),
            },
        };
        Self {
            lambda1: preference.first(),
            lambda2: preference.second(),
            obj1_return: mean(&|e| e.obj1_return),
            obj2_return: mean(&|e| e.obj2_return),
            task_return: mean(&|e| e.task_return),
            metrics,
            episodes: episodes.len(),
        }
    }
}

/// A sweep row with the episodes behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub row: SweepRow,
    pub episodes: Vec<EpisodeStats>,
}

/// Evaluation settings shared by every preference of a sweep.
#[derive(Debug, Clone)]
pub struct EvalSetup<'a> {
    pub policy: &'a PolicyParams<f32>,
    pub env: EnvName,
    pub params: &'a EnvParams,
    pub episodes: usize,
    pub seed: u64,
    pub execution: Execution,
}

struct Runner {
    env: Environment,
    history: History,
    stats: EpisodeStats,
    done: bool,
}

fn check_policy(policy: &PolicyParams<f32>, env: EnvName, params: &EnvParams) -> Result<()> {
    let spec = params.spec(env);
    if policy.stacked_dim != spec.stacked_dim() || policy.act_dim != spec.act_dim {
        return Err(Error::Checkpoint(format!(
            "policy expects {}-wide histories and {} actions; {env} provides {} and {}",
            policy.stacked_dim,
            policy.act_dim,
            spec.stacked_dim(),
            spec.act_dim
        )));
    }
    Ok(())
}

fn mean_actions(policy: &PolicyParams<f32>, runners: &[Runner], preference: PreferenceVector) -> Result<Array2<f32>> {
    let d = policy.stacked_dim;
    let mut x = Array2::zeros((runners.len(), d));
    for (mut row, r) in x.rows_mut().into_iter().zip(runners) {
        for (dst, v) in row.iter_mut().zip(r.history.stacked()) {
            *dst = v as f32;
        }
    }
    Ok(policy.actor_forward(&x, &vec![preference; runners.len()])?.mean)
}

/// Runs `setup.episodes` episodes in lockstep with mean actions and
/// disturbances enabled. Episode `k` uses the seed stream `split(k)`.
pub fn evaluate(setup: &EvalSetup, preference: PreferenceVector) -> Result<Evaluation> {
    check_policy(setup.policy, setup.env, setup.params)?;
    let params = setup.params.with_disturbances(true);
    let spec = params.spec(setup.env);
    let root = RngStream::new(setup.seed);
    let mut runners = (0..setup.episodes)
        .map(|k| {
            let mut env = Environment::new(setup.env, &params, root.split(k as u64))?;
            let first = env.reset(preference);
            Ok(Runner {
                history: History::new(spec.history_len, &first),
                env,
                stats: EpisodeStats::default(),
                done: false,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    while runners.iter().any(|r| !r.done) {
        let actions = mean_actions(setup.policy, &runners, preference)?;
        let results = setup.execution.for_each_mut(&mut runners, |i, r| -> Result<()> {
            if r.done {
                return Ok(());
            }
            let a: Vec<f64> = actions.row(i).iter().map(|&v| v as f64).collect();
            let step = r.env.step(&a)?;
            r.stats.record(&step);
            r.history.push(&step.observation);
            r.done = step.done;
            Ok(())
        });
        results.into_iter().collect::<Result<()>>()?;
    }
    let episodes: Vec<EpisodeStats> = runners.into_iter().map(|r| r.stats).collect();
    Ok(Evaluation {
        row: SweepRow::aggregate(setup.env, preference, &episodes),
        episodes,
    })
}

/// Evaluates every point of the `n_points` simplex grid, `(1, 0)` first.
pub fn sweep(setup: &EvalSetup, n_points: usize) -> Result<Vec<Evaluation>> {
    PreferenceVector::simplex_grid(n_points)?
        .into_iter()
        .map(|p| evaluate(setup, p))
        .collect()
}

/// One step of a switch demo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchStep {
    pub t: usize,
    pub lambda: [f64; 2],
    pub task: f64,
    pub obj1: f64,
    pub obj2: f64,
    pub energy: f64,
    pub torque_abs: f64,
    pub in_disturbance: bool,
    pub state: Vec<f64>,
}

/// A single evaluation episode whose preference changes at `t_switch`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchDemo {
    pub env: EnvName,
    pub t_switch: usize,
    pub before: [f64; 2],
    pub after: [f64; 2],
    pub terminated: bool,
    pub completed: bool,
    pub steps: Vec<SwitchStep>,
}

impl SwitchDemo {
    /// Mean per-step energy over `window` steps just before and just after
    /// the switch (clipped to the episode).
    pub fn energy_windows(&self, window: usize) -> (f64, f64) {
        let mean = |s: &[SwitchStep]| s.iter().map(|x| x.energy).sum::<f64>() / s.len().max(1) as f64;
        let n = self.steps.len();
        let t = self.t_switch.min(n);
        let pre = &self.steps[t.saturating_sub(window)..t];
        let post = &self.steps[t..(t + window).min(n)];
        (mean(pre), mean(post))
    }
}

/// One environment driven by a policy's mean action, with a preference that
/// can change between steps. Used by switch demos and the live service.
#[derive(Debug, Clone)]
pub struct Controller {
    policy: PolicyParams<f32>,
    env: Environment,
    history: History,
    preference: PreferenceVector,
    stacked_dim: usize,
    step: usize,
}

impl Controller {
    pub fn new(
        policy: PolicyParams<f32>,
        env_name: EnvName,
        params: &EnvParams,
        rng: RngStream,
        preference: PreferenceVector,
    ) -> Result<Self> {
        check_policy(&policy, env_name, params)?;
        let spec = params.spec(env_name);
        let mut env = Environment::new(env_name, params, rng)?;
        let first = env.reset(preference);
        Ok(Self {
            policy,
            history: History::new(spec.history_len, &first),
            env,
            preference,
            stacked_dim: spec.stacked_dim(),
            step: 0,
        })
    }

    pub fn preference(&self) -> PreferenceVector {
        self.preference
    }

    /// Steps taken in the current episode.
    pub fn step_count(&self) -> usize {
        self.step
    }

    /// Replaces the preference in the environment and in every stored
    /// history frame, so the next action sees only the new value.
    pub fn set_preference(&mut self, preference: PreferenceVector) {
        self.preference = preference;
        self.env.set_preference(preference);
        self.history.overwrite_preference(preference);
    }

    /// Starts a new episode under the current preference.
    pub fn reset(&mut self) {
        let first = self.env.reset(self.preference);
        self.history.reset(&first);
        self.step = 0;
    }

    pub fn render_state(&self) -> Vec<f64> {
        self.env.render_state()
    }

    pub fn step(&mut self) -> Result<StepResult> {
        let mut x = Array2::zeros((1, self.stacked_dim));
        for (dst, v) in x.iter_mut().zip(self.history.stacked()) {
            *dst = v as f32;
        }
        let mean = self.policy.actor_forward(&x, &[self.preference])?.mean;
        let a: Vec<f64> = mean.iter().map(|&v| v as f64).collect();
        let step = self.env.step(&a)?;
        self.history.push(&step.observation);
        self.step += 1;
        Ok(step)
    }
}

/// Runs one episode under `before`, replacing the preference with `after`
/// (in the environment and in every stored history frame) at step
/// `t_switch`.
pub fn switch_demo(
    policy: &PolicyParams<f32>,
    env_name: EnvName,
    params: &EnvParams,
    seed: u64,
    t_switch: usize,
    before: PreferenceVector,
    after: PreferenceVector,
) -> Result<SwitchDemo> {
    let params = params.with_disturbances(true);
    let horizon = params.spec(env_name).horizon;
    let mut ctl = Controller::new(policy.clone(), env_name, &params, RngStream::new(seed).split(0), before)?;
    if t_switch == 0 || t_switch > horizon {
        return Err(Error::invalid(format!("t_switch must lie in 1..={horizon}")));
    }
    let mut steps = Vec::with_capacity(horizon);
    let mut terminated = false;
    for t in 0..horizon {
        if t == t_switch {
            ctl.set_preference(after);
        }
        let step = ctl.step()?;
        steps.push(SwitchStep {
            t,
            lambda: ctl.preference().weights(),
            task: step.rewards.task,
            obj1: step.rewards.obj1,
            obj2: step.rewards.obj2,
            energy: step.info.energy,
            torque_abs: step.info.torque_abs,
            in_disturbance: step.info.in_disturbance,
            state: ctl.render_state(),
        });
        if step.done {
            terminated = step.terminated;
            break;
        }
    }
    Ok(SwitchDemo {
        env: env_name,
        t_switch,
        before: before.weights(),
        after: after.weights(),
        completed: !terminated && steps.len() == horizon,
        terminated,
        steps,
    })
}
