use std::collections::VecDeque;

use ndarray::Array2;

use super::TrainConfig;
use crate::amp::AMP_WINDOW;
use crate::autodiff::{Graph, Scalar};
use crate::envs::{amp_state_dim, EnvName, EnvParams, EnvSpec, Environment, EpisodeStats, History};
use crate::error::{Error, Result};
use crate::nn::{CriticHead, PolicyParams};
use crate::preference::{sample_dirichlet, PreferenceVector};
use crate::rng::RngStream;

/// A finished episode and the preference it ran under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub preference: PreferenceVector,
    pub stats: EpisodeStats,
}

/// One environment plus everything needed to continue it across iterations.
#[derive(Debug, Clone)]
struct EnvSlot {
    env: Environment,
    history: History,
    preference: PreferenceVector,
    rng: RngStream,
    stats: EpisodeStats,
    amp: VecDeque<Vec<f64>>,
}

impl EnvSlot {
    fn amp_window(&self) -> Vec<f64> {
        self.amp.iter().flatten().copied().collect()
    }

    fn reset_amp(&mut self) {
        let s = self.env.amp_state();
        self.amp = std::iter::repeat_n(s, AMP_WINDOW).collect();
    }
}

/// Persistent parallel environments. Episodes run on across iterations; a
/// new preference is drawn whenever one ends.
#[derive(Debug, Clone)]
pub struct RolloutState {
    spec: EnvSpec,
    slots: Vec<EnvSlot>,
    draw: PreferenceDraw,
}

/// How a new episode's preference is chosen.
#[derive(Debug, Clone, Copy)]
struct PreferenceDraw {
    dirichlet: [f64; 2],
    vertex_prob: f64,
    fixed: Option<PreferenceVector>,
}

impl PreferenceDraw {
    fn new(config: &TrainConfig) -> Self {
        Self {
            dirichlet: config.dirichlet_conc,
            vertex_prob: config.vertex_prob,
            fixed: config.fixed_preference,
        }
    }

    // A Dirichlet draw never lands exactly on a vertex, where the endpoint
    // experts get all of their routing weight, so a share of episodes is
    // pinned to one vertex or the other.
    fn sample(&self, rng: &mut RngStream) -> Result<PreferenceVector> {
        if let Some(p) = self.fixed {
            return Ok(p);
        }
        let u = rng.uniform();
        if u < self.vertex_prob {
            let first = if u < 0.5 * self.vertex_prob { 1.0 } else { 0.0 };
            return PreferenceVector::from_first(first);
        }
        sample_dirichlet(rng, self.dirichlet)
    }
}

impl RolloutState {
    pub fn new(name: EnvName, params: &EnvParams, config: &TrainConfig, rng: &RngStream) -> Result<Self> {
        params.validate()?;
        let spec = params.spec(name);
        let mut slots = Vec::with_capacity(config.n_envs);
        for e in 0..config.n_envs {
            let env = Environment::new(name, params, rng.split(2 * e as u64))?;
            let mut srng = rng.split(2 * e as u64 + 1);
            let draw = PreferenceDraw::new(config);
            let preference = draw.sample(&mut srng)?;
            let mut slot = EnvSlot {
                history: History::new(spec.history_len, &env.observation()),
                env,
                preference,
                rng: srng,
                stats: EpisodeStats::default(),
                amp: VecDeque::new(),
            };
            let first = slot.env.reset(preference);
            slot.history.reset(&first);
            slot.reset_amp();
            slots.push(slot);
        }
        Ok(Self {
            spec,
            slots,
            draw: PreferenceDraw::new(config),
        })
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn n_envs(&self) -> usize {
        self.slots.len()
    }

    fn stacked(&self) -> Array2<f32> {
        let d = self.spec.stacked_dim();
        let mut x = Array2::zeros((self.slots.len(), d));
        for (mut row, slot) in x.rows_mut().into_iter().zip(&self.slots) {
            for (dst, v) in row.iter_mut().zip(slot.history.stacked()) {
                *dst = v as f32;
            }
        }
        x
    }
}

/// Transitions from every environment, stored time-major: transition
/// `t·n_envs + e` is step `t` of environment `e`.
#[derive(Debug, Clone)]
pub struct RolloutBatch {
    pub n_envs: usize,
    pub horizon: usize,
    pub obs: Array2<f32>,
    pub actions: Array2<f32>,
    pub log_probs: Vec<f64>,
    /// Critic predictions in [`CriticHead::ALL`] order.
    pub values: [Vec<f64>; 3],
    /// Rewards in [`CriticHead::ALL`] order.
    pub rewards: [Vec<f64>; 3],
    pub dones: Vec<bool>,
    pub preferences: Vec<PreferenceVector>,
    /// Values of the state after the last step, per environment.
    pub bootstrap: [Vec<f64>; 3],
    /// Style windows ending at each post-step state, when requested.
    pub amp_windows: Option<Array2<f32>>,
    pub episodes: Vec<EpisodeSummary>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.dones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dones.is_empty()
    }

    /// Series of environment `e` for one stream, in time order.
    pub fn env_series(&self, series: &[f64], e: usize) -> Vec<f64> {
        (0..self.horizon).map(|t| series[t * self.n_envs + e]).collect()
    }

    pub fn env_dones(&self, e: usize) -> Vec<bool> {
        (0..self.horizon).map(|t| self.dones[t * self.n_envs + e]).collect()
    }
}

struct StepOutcome {
    rewards: [f64; 3],
    done: bool,
    amp_window: Option<Vec<f64>>,
    finished: Option<EpisodeSummary>,
}

/// Runs every environment for `config.horizon` steps with actions sampled
/// from the policy.
pub fn collect_rollouts(
    policy: &PolicyParams<f32>,
    state: &mut RolloutState,
    config: &TrainConfig,
    record_amp: bool,
) -> Result<RolloutBatch> {
    let spec = state.spec;
    if policy.stacked_dim != spec.stacked_dim() || policy.act_dim != spec.act_dim {
        return Err(Error::ShapeMismatch {
            op: "collect_rollouts",
            expected: format!("policy for {} ({}/{})", spec.name, spec.stacked_dim(), spec.act_dim),
            actual: format!("{}/{}", policy.stacked_dim, policy.act_dim),
        });
    }
    let n = state.n_envs();
    let horizon = config.horizon;
    let total = n * horizon;
    let amp_dim = AMP_WINDOW * amp_state_dim(spec.name);
    let mut batch = RolloutBatch {
        n_envs: n,
        horizon,
        obs: Array2::zeros((total, spec.stacked_dim())),
        actions: Array2::zeros((total, spec.act_dim)),
        log_probs: Vec::with_capacity(total),
        values: Default::default(),
        rewards: Default::default(),
        dones: Vec::with_capacity(total),
        preferences: Vec::with_capacity(total),
        bootstrap: Default::default(),
        amp_windows: record_amp.then(|| Array2::zeros((total, amp_dim))),
        episodes: Vec::new(),
    };

    for t in 0..horizon {
        let obs = state.stacked();
        let prefs: Vec<PreferenceVector> = state.slots.iter().map(|s| s.preference).collect();

        let mut g = Graph::<f32>::new();
        let x = g.constant(obs.clone());
        let nodes = policy.actor_graph(&mut g, x, &prefs);
        let heads: Vec<_> = CriticHead::ALL.iter().map(|&h| policy.critic_graph(&mut g, x, h)).collect();
        g.check()?;
        let std: Vec<f32> = g.value(nodes.log_std).iter().map(|v| v.exp()).collect();
        let mut actions = g.value(nodes.mean).clone();
        for (mut row, slot) in actions.rows_mut().into_iter().zip(state.slots.iter_mut()) {
            for (a, s) in row.iter_mut().zip(&std) {
                *a += s * slot.rng.normal() as f32;
            }
        }
        let act = g.constant(actions.clone());
        let logp = policy.log_prob_graph(&mut g, &nodes, act);
        g.check()?;

        let base = t * n;
        batch.obs.slice_mut(ndarray::s![base..base + n, ..]).assign(&obs);
        batch.actions.slice_mut(ndarray::s![base..base + n, ..]).assign(&actions);
        batch.log_probs.extend(g.value(logp).iter().map(|&v| Scalar::to_f64(v)));
        for (h, &node) in heads.iter().enumerate() {
            let stats = policy.value_norm[h];
            batch.values[h].extend(g.value(node).iter().map(|&v| stats.denormalize(Scalar::to_f64(v))));
        }
        batch.preferences.extend(&prefs);

        let draw = state.draw;
        let outcomes = config.execution.for_each_mut(&mut state.slots, |e, slot| -> Result<StepOutcome> {
            let a: Vec<f64> = actions.row(e).iter().map(|&v| v as f64).collect();
            let step = slot.env.step(&a)?;
            slot.stats.record(&step);
            slot.history.push(&step.observation);
            let amp_window = record_amp.then(|| {
                slot.amp.pop_front();
                slot.amp.push_back(slot.env.amp_state());
                slot.amp_window()
            });
            let rewards = [step.rewards.task, step.rewards.obj1, step.rewards.obj2];
            let mut finished = None;
            if step.done {
                finished = Some(EpisodeSummary {
                    preference: slot.preference,
                    stats: std::mem::take(&mut slot.stats),
                });
                slot.preference = draw.sample(&mut slot.rng)?;
                let first = slot.env.reset(slot.preference);
                slot.history.reset(&first);
                slot.reset_amp();
            }
            Ok(StepOutcome {
                rewards,
                done: step.done,
                amp_window,
                finished,
            })
        });
        for (e, outcome) in outcomes.into_iter().enumerate() {
            let o = outcome?;
            for h in 0..3 {
                batch.rewards[h].push(o.rewards[h]);
            }
            batch.dones.push(o.done);
            if let (Some(w), Some(store)) = (o.amp_window, batch.amp_windows.as_mut()) {
                for (dst, v) in store.row_mut(base + e).iter_mut().zip(w) {
                    *dst = v as f32;
                }
            }
            if let Some(ep) = o.finished {
                batch.episodes.push(ep);
            }
        }
    }

    let last = policy.critic_forward(&state.stacked())?;
    for h in 0..3 {
        batch.bootstrap[h] = last.column(h).iter().map(|&v| v as f64).collect();
    }
    Ok(batch)
}
