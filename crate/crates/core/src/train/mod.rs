//! Preference-conditioned PPO: rollouts under sampled preferences,
//! per-critic advantages, preference-weighted clipped updates.

mod config;
mod gae;
mod ppo;
mod rollout;

pub use config::TrainConfig;
pub use gae::{compute_gae, normalize, preference_advantage, AdvantageRecord};
pub use ppo::{build_loss, clip_grad_groups, minibatch_from_batch, ppo_update, Adam, LossNodes, MinibatchData, UpdateStats};
pub use rollout::{collect_rollouts, EpisodeSummary, RolloutBatch, RolloutState};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::amp::{generate_reference, DiscStats, Discriminator, ReferenceDataset, AMP_WINDOW};
use crate::envs::amp_state_dim;
use crate::error::{Error, Result};
use crate::io::RunConfig;
use crate::nn::{PolicyParams, RoutingMode};
use crate::rng::RngStream;

/// GAE per environment and head, then per-stream normalization over the
/// whole batch. A stream whose rewards are all zero in this batch carries no
/// signal, only critic error, so its advantages are zeroed instead of being
/// scaled up to unit variance.
pub fn compute_advantages(batch: &RolloutBatch, config: &TrainConfig) -> Result<AdvantageRecord> {
    let total = batch.len();
    let mut adv: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; total]);
    let mut returns: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; total]);
    for e in 0..batch.n_envs {
        let dones = batch.env_dones(e);
        for h in 0..3 {
            let (a, r) = compute_gae(
                &batch.env_series(&batch.rewards[h], e),
                &batch.env_series(&batch.values[h], e),
                batch.bootstrap[h][e],
                &dones,
                config.gamma,
                config.gae_lambda,
            )?;
            for t in 0..batch.horizon {
                adv[h][t * batch.n_envs + e] = a[t];
                returns[h][t * batch.n_envs + e] = r[t];
            }
        }
    }
    for (a, r) in adv.iter_mut().zip(&batch.rewards) {
        if r.iter().all(|&x| x == 0.0) {
            a.iter_mut().for_each(|x| *x = 0.0);
        } else {
            normalize(a);
        }
    }
    let [adv_task, adv_obj1, adv_obj2] = adv;
    Ok(AdvantageRecord {
        adv_task,
        adv_obj1,
        adv_obj2,
        returns,
    })
}

/// One line of the metric log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub iteration: usize,
    /// Episodes finished during this iteration's rollout.
    pub episodes: usize,
    pub obj1_return: Option<f64>,
    pub obj2_return: Option<f64>,
    pub task_return: Option<f64>,
    pub success_rate: Option<f64>,
    pub update: UpdateStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style_reward: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discriminator: Option<DiscStats>,
}

/// Receives training output as it is produced.
pub trait TrainSink {
    fn metric(&mut self, record: &MetricRecord) -> Result<()>;
    fn checkpoint(&mut self, iteration: usize, policy: &PolicyParams<f32>) -> Result<()>;
}

/// Collects records in memory; checkpoints are kept as clones.
#[derive(Debug, Default)]
pub struct MemorySink {
    pub records: Vec<MetricRecord>,
    pub checkpoints: Vec<(usize, PolicyParams<f32>)>,
}

impl TrainSink for MemorySink {
    fn metric(&mut self, record: &MetricRecord) -> Result<()> {
        self.records.push(record.clone());
        Ok(())
    }

    fn checkpoint(&mut self, iteration: usize, policy: &PolicyParams<f32>) -> Result<()> {
        self.checkpoints.push((iteration, policy.clone()));
        Ok(())
    }
}

struct AmpState {
    disc: Discriminator<f32>,
    optimizer: Adam,
    reference: ReferenceDataset,
    rng: RngStream,
}

/// Owns the policy, optimizer state and environments of one training run.
pub struct Trainer {
    run: RunConfig,
    policy: PolicyParams<f32>,
    optimizer: Adam,
    state: RolloutState,
    update_rng: RngStream,
    amp: Option<AmpState>,
    iteration: usize,
}

impl Trainer {
    pub fn new(run: RunConfig) -> Result<Self> {
        run.validate()?;
        let root = RngStream::new(run.seed);
        let spec = run.env_params.spec(run.env);
        let mode = if run.train.ablation_gate {
            RoutingMode::Gate
        } else {
            RoutingMode::Beta
        };
        let policy = PolicyParams::new(run.network.clone(), mode, &spec, &mut root.split(0))?;
        let optimizer = Adam::new(policy.store.tensors(), run.train.learning_rate);
        let state = RolloutState::new(run.env, &run.env_params, &run.train, &root.split(1))?;
        let amp = if run.train.amp_enabled {
            let amp_root = root.split(3);
            let reference =
                generate_reference(run.env, &run.env_params, &amp_root.split(0), run.amp.reference_episodes)?;
            let dim = AMP_WINDOW * amp_state_dim(run.env);
            let disc = Discriminator::new(dim, &run.amp.hidden, &mut amp_root.split(1));
            let optimizer = Adam::new(disc.store.tensors(), run.amp.learning_rate);
            Some(AmpState {
                disc,
                optimizer,
                reference,
                rng: amp_root.split(2),
            })
        } else {
            None
        };
        Ok(Self {
            run,
            policy,
            optimizer,
            state,
            update_rng: root.split(2),
            amp,
            iteration: 0,
        })
    }

    pub fn policy(&self) -> &PolicyParams<f32> {
        &self.policy
    }

    pub fn run_config(&self) -> &RunConfig {
        &self.run
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Collect, score style (if enabled), estimate advantages, update.
    pub fn run_iteration(&mut self) -> Result<MetricRecord> {
        let config = &self.run.train;
        let mut batch = collect_rollouts(&self.policy, &mut self.state, config, self.amp.is_some())?;

        let (mut style_reward, mut discriminator) = (None, None);
        if let (Some(amp), Some(windows)) = (self.amp.as_mut(), batch.amp_windows.as_ref()) {
            let style = amp.disc.style_rewards(windows, self.run.amp.reward_scale)?;
            style_reward = Some(style.iter().sum::<f64>() / style.len() as f64);
            for (r, s) in batch.rewards[0].iter_mut().zip(&style) {
                *r += s;
            }
            let n = self.run.amp.batch_size;
            let mut last = DiscStats::default();
            for _ in 0..self.run.amp.steps_per_iter {
                let reference = sample_rows(&amp.reference.windows, n, &mut amp.rng);
                let policy = sample_rows(windows, n, &mut amp.rng);
                last = amp.disc.update(&mut amp.optimizer, &reference, &policy, self.run.amp.penalty_weight)?;
            }
            discriminator = Some(last);
        }

        let adv = compute_advantages(&batch, config)?;
        let update = ppo_update(&mut self.policy, &mut self.optimizer, &batch, &adv, config, &mut self.update_rng)?;
        self.iteration += 1;

        let eps = &batch.episodes;
        let mean = |f: &dyn Fn(&EpisodeSummary) -> f64| {
            (!eps.is_empty()).then(|| eps.iter().map(f).sum::<f64>() / eps.len() as f64)
        };
        Ok(MetricRecord {
            iteration: self.iteration,
            episodes: eps.len(),
            obj1_return: mean(&|e| e.stats.obj1_return),
            obj2_return: mean(&|e| e.stats.obj2_return),
            task_return: mean(&|e| e.stats.task_return),
            success_rate: mean(&|e| if e.stats.success { 1.0 } else { 0.0 }),
            update,
            style_reward,
            discriminator,
        })
    }
}

fn sample_rows(src: &Array2<f32>, n: usize, rng: &mut RngStream) -> Array2<f32> {
    let idx: Vec<usize> = (0..n).map(|_| rng.int_range(0, src.nrows() - 1)).collect();
    src.select(ndarray::Axis(0), &idx)
}

/// Runs `run.train.iterations` iterations, streaming records and periodic
/// checkpoints to `sink`. With zero iterations only the initial checkpoint
/// is emitted.
pub fn train(run: RunConfig, sink: &mut dyn TrainSink) -> Result<Trainer> {
    let mut trainer = Trainer::new(run)?;
    let iterations = trainer.run.train.iterations;
    let every = trainer.run.train.checkpoint_every;
    if iterations == 0 {
        sink.checkpoint(0, &trainer.policy)?;
        return Ok(trainer);
    }
    for it in 1..=iterations {
        let record = trainer.run_iteration().map_err(|e| Error::TrainingAborted {
            iteration: it,
            source: Box::new(e),
        })?;
        sink.metric(&record)?;
        if it == iterations || (every > 0 && it % every == 0) {
            sink.checkpoint(it, &trainer.policy)?;
        }
    }
    Ok(trainer)
}
