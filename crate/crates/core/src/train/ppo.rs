use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{AdvantageRecord, RolloutBatch, TrainConfig};
use crate::autodiff::{cast, Graph, Scalar, Tensor, Var};
use crate::error::{Error, Result};
use crate::nn::{CriticHead, PolicyParams};
use crate::preference::PreferenceVector;
use crate::rng::RngStream;

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<Tensor<f32>>,
    v: Vec<Tensor<f32>>,
}

impl Adam {
    pub fn new(params: &[Tensor<f32>], lr: f64) -> Self {
        let zeros: Vec<Tensor<f32>> = params.iter().map(|t| Array2::zeros(t.dim())).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn apply(&mut self, params: &mut [Tensor<f32>], grads: &[Tensor<f32>]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2) = (self.beta1 as f32, self.beta2 as f32);
        let (lr, eps) = (self.lr as f32, self.eps as f32);
        let (c1, c2) = (c1 as f32, c2 as f32);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        }
    }
}

/// The slice of a batch that one loss evaluation sees.
#[derive(Debug, Clone)]
pub struct MinibatchData<F> {
    pub obs: Tensor<F>,
    pub actions: Tensor<F>,
    pub preferences: Vec<PreferenceVector>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    /// Normalized value targets in [`CriticHead::ALL`] order.
    pub targets: [Vec<f64>; 3],
    /// Weight applied to every per-sample term (1 / minibatch size).
    pub weight: f64,
}

impl<F: Scalar> MinibatchData<F> {
    pub fn len(&self) -> usize {
        self.old_log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.old_log_probs.is_empty()
    }
}

/// Nodes of one loss evaluation.
#[derive(Debug, Clone, Copy)]
pub struct LossNodes {
    /// Scalar minimized by the update.
    pub total: Var,
    /// `Σ_k min(r_k·Â_k, clip(r_k)·Â_k)`, unweighted.
    pub surrogate: Var,
    /// Probability ratios, `n × 1`.
    pub ratio: Var,
    /// Entropy of the action distribution.
    pub entropy: Var,
    /// Per-head summed squared errors, unweighted.
    pub value_errors: [Var; 3],
}

fn column<F: Scalar>(values: &[f64]) -> Tensor<F> {
    Array2::from_shape_fn((values.len(), 1), |(i, _)| <F as Scalar>::from_f64(values[i]))
}

/// Builds the clipped-surrogate loss with entropy bonus and value errors:
/// `−w·Σ min(r·Â, clip(r)·Â) − c_H·H·w·n + c_V·w·Σ_heads Σ (V − target)²`.
pub fn build_loss<F: Scalar>(
    g: &mut Graph<F>,
    policy: &PolicyParams<F>,
    mb: &MinibatchData<F>,
    config: &TrainConfig,
) -> LossNodes {
    let n = mb.len();
    let w = mb.weight;
    let x = g.constant(mb.obs.clone());
    let nodes = policy.actor_graph(g, x, &mb.preferences);
    let act = g.constant(mb.actions.clone());
    let logp = policy.log_prob_graph(g, &nodes, act);
    let old = g.constant(column(&mb.old_log_probs));
    let adv = g.constant(column(&mb.advantages));
    let log_ratio = g.sub(logp, old);
    let ratio = g.exp(log_ratio);
    let unclipped = g.mul(ratio, adv);
    let eps = config.clip_eps;
    let clipped_ratio = g.clamp(ratio, <F as Scalar>::from_f64(1.0 - eps), <F as Scalar>::from_f64(1.0 + eps));
    let clipped = g.mul(clipped_ratio, adv);
    let pessimistic = g.minimum(unclipped, clipped);
    let surrogate = g.sum(pessimistic);

    let d = policy.act_dim as f64;
    let log_std_sum = g.sum(nodes.log_std);
    let entropy = g.affine(
        log_std_sum,
        F::one(),
        <F as Scalar>::from_f64(0.5 * d * (1.0 + (2.0 * std::f64::consts::PI).ln())),
    );

    let mut value_errors = Vec::with_capacity(3);
    for h in CriticHead::ALL {
        let v = policy.critic_graph(g, x, h);
        let target = g.constant(column(&mb.targets[h.index()]));
        let diff = g.sub(v, target);
        let sq = g.square(diff);
        value_errors.push(g.sum(sq));
    }
    let value_errors: [Var; 3] = value_errors.try_into().expect("three heads");

    let policy_term = g.scale(surrogate, <F as Scalar>::from_f64(-w));
    let entropy_term = g.scale(entropy, <F as Scalar>::from_f64(-config.entropy_coef * w * n as f64));
    let mut total = g.add(policy_term, entropy_term);
    for &e in &value_errors {
        let term = g.scale(e, <F as Scalar>::from_f64(config.value_coef * w));
        total = g.add(total, term);
    }
    LossNodes {
        total,
        surrogate,
        ratio,
        entropy,
        value_errors,
    }
}

/// Averages over every minibatch step of one update.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    /// Mean squared error per head in normalized units.
    pub value_loss: [f64; 3],
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    /// Pre-clipping gradient norm of the actor group.
    pub actor_grad_norm: f64,
}

struct ChunkResult {
    grads: Vec<Tensor<f32>>,
    surrogate: f64,
    value_errors: [f64; 3],
    entropy: f64,
    kl: f64,
    clipped: usize,
}

fn gather_rows(src: &Array2<f32>, idx: &[usize]) -> Array2<f32> {
    src.select(Axis(0), idx)
}

/// Rescales each parameter group so its gradient norm is at most
/// `max_norm`; returns the pre-clipping norm of every group.
pub fn clip_grad_groups(grads: &mut [Tensor<f32>], groups: &[(&str, Vec<usize>)], max_norm: f64) -> Vec<f64> {
    groups
        .iter()
        .map(|(_, members)| {
            let norm = members
                .iter()
                .map(|&i| grads[i].iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>())
                .sum::<f64>()
                .sqrt();
            if norm > max_norm {
                let s = (max_norm / norm) as f32;
                for &i in members {
                    grads[i].mapv_inplace(|v| v * s);
                }
            }
            norm
        })
        .collect()
}

/// Clipped-surrogate update over `epochs_per_iter` shuffled passes.
///
/// Running return statistics are refreshed first; critics then regress the
/// returns in normalized units.
pub fn ppo_update(
    policy: &mut PolicyParams<f32>,
    optimizer: &mut Adam,
    batch: &RolloutBatch,
    adv: &AdvantageRecord,
    config: &TrainConfig,
    rng: &mut RngStream,
) -> Result<UpdateStats> {
    let total = batch.len();
    if adv.len() != total {
        return Err(Error::ShapeMismatch {
            op: "ppo_update",
            expected: format!("{total} advantages"),
            actual: adv.len().to_string(),
        });
    }
    for h in 0..3 {
        policy.value_norm[h].update(&adv.returns[h]);
    }
    let targets: [Vec<f64>; 3] = std::array::from_fn(|h| {
        let s = policy.value_norm[h];
        adv.returns[h].iter().map(|&r| s.normalize(r)).collect()
    });
    let combined: Vec<f64> = (0..total).map(|k| adv.combined(k, batch.preferences[k])).collect();
    let groups = policy.param_groups();

    let mut stats = UpdateStats::default();
    let mut steps = 0usize;
    let mut order: Vec<usize> = (0..total).collect();
    let mb_size = total.div_ceil(config.minibatches);
    for _ in 0..config.epochs_per_iter {
        rng.shuffle(&mut order);
        for mb in order.chunks(mb_size) {
            let weight = 1.0 / mb.len() as f64;
            let chunk = mb.len().div_ceil(config.grad_chunks);
            let pieces: Vec<&[usize]> = mb.chunks(chunk).collect();
            let frozen = &*policy;
            let results = config.execution.map_range(pieces.len(), |c| -> Result<ChunkResult> {
                let idx = pieces[c];
                let data = MinibatchData::<f32> {
                    obs: gather_rows(&batch.obs, idx),
                    actions: gather_rows(&batch.actions, idx),
                    preferences: idx.iter().map(|&k| batch.preferences[k]).collect(),
                    old_log_probs: idx.iter().map(|&k| batch.log_probs[k]).collect(),
                    advantages: idx.iter().map(|&k| combined[k]).collect(),
                    targets: std::array::from_fn(|h| idx.iter().map(|&k| targets[h][k]).collect()),
                    weight,
                };
                let mut g = Graph::new();
                let nodes = build_loss(&mut g, frozen, &data, config);
                let grads = g.backward(nodes.total)?;
                let ratio = g.value(nodes.ratio);
                let eps = config.clip_eps as f32;
                let mut kl = 0.0;
                for &r in ratio.iter() {
                    // low-variance estimator of KL(old || new)
                    let r = r as f64;
                    kl += (r - 1.0) - r.ln();
                }
                Ok(ChunkResult {
                    grads: frozen.store.collect_grads(&grads),
                    surrogate: g.scalar(nodes.surrogate) as f64,
                    value_errors: nodes.value_errors.map(|v| g.scalar(v) as f64),
                    entropy: g.scalar(nodes.entropy) as f64,
                    kl,
                    clipped: ratio.iter().filter(|&&r| (r - 1.0).abs() > eps).count(),
                })
            });
            let mut grads = policy.store.zeros_like();
            let (mut surrogate, mut kl, mut clipped, mut entropy) = (0.0, 0.0, 0usize, 0.0);
            let mut value_errors = [0.0; 3];
            for r in results {
                let r = r?;
                for (acc, g) in grads.iter_mut().zip(&r.grads) {
                    acc.zip_mut_with(g, |x, &y| *x += y);
                }
                surrogate += r.surrogate;
                kl += r.kl;
                clipped += r.clipped;
                entropy = r.entropy;
                for (acc, e) in value_errors.iter_mut().zip(r.value_errors) {
                    *acc += e;
                }
            }
            if !grads.iter().all(|t| t.iter().all(|v| v.is_finite())) {
                return Err(Error::NonFinite { op: "ppo gradient" });
            }
            let norms = clip_grad_groups(&mut grads, &groups, config.max_grad_norm);
            optimizer.apply(policy.store.tensors_mut(), &grads);

            stats.policy_loss -= surrogate * weight;
            for (acc, e) in stats.value_loss.iter_mut().zip(value_errors) {
                *acc += e * weight;
            }
            stats.entropy += entropy;
            stats.approx_kl += kl * weight;
            stats.clip_fraction += clipped as f64 * weight;
            stats.actor_grad_norm += norms[0];
            steps += 1;
        }
    }
    let s = steps.max(1) as f64;
    stats.policy_loss /= s;
    stats.value_loss.iter_mut().for_each(|v| *v /= s);
    stats.entropy /= s;
    stats.approx_kl /= s;
    stats.clip_fraction /= s;
    stats.actor_grad_norm /= s;
    if !(stats.policy_loss.is_finite() && stats.value_loss.iter().all(|v| v.is_finite())) {
        return Err(Error::NonFinite { op: "ppo loss" });
    }
    Ok(stats)
}

/// Converts rollout slices to the precision of a gradient check.
pub fn minibatch_from_batch<F: Scalar>(
    batch: &RolloutBatch,
    adv: &AdvantageRecord,
    indices: &[usize],
    targets: &[Vec<f64>; 3],
) -> MinibatchData<F> {
    MinibatchData {
        obs: cast(&gather_rows(&batch.obs, indices)),
        actions: cast(&gather_rows(&batch.actions, indices)),
        preferences: indices.iter().map(|&k| batch.preferences[k]).collect(),
        old_log_probs: indices.iter().map(|&k| batch.log_probs[k]).collect(),
        advantages: indices.iter().map(|&k| adv.combined(k, batch.preferences[k])).collect(),
        targets: std::array::from_fn(|h| indices.iter().map(|&k| targets[h][k]).collect()),
        weight: 1.0 / indices.len() as f64,
    }
}
