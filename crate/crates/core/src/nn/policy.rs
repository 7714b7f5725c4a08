use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::{beta_routing_weights, RunningStats, log_prob_graph, ActionDistribution, BetaRouting, Mlp, ParamStore, EXPERT_COUNT};
use crate::autodiff::{Graph, Scalar, Tensor, Var};
use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::preference::PreferenceVector;
use crate::rng::RngStream;

/// How expert outputs are mixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoutingMode {
    /// Fixed Beta kernel driven by the preference.
    #[default]
    Beta,
    /// Learned softmax gate over `[current observation, λ]` (ablation).
    Gate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub encoder_hidden: Vec<usize>,
    pub latent_dim: usize,
    pub expert_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub log_std_init: f64,
    pub log_std_min: f64,
    pub log_std_max: f64,
    pub output_gain: f64,
    pub routing: BetaRouting,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            encoder_hidden: vec![64],
            latent_dim: 32,
            expert_hidden: vec![64, 64],
            critic_hidden: vec![64, 64],
            log_std_init: 0.0,
            log_std_min: -4.0,
            log_std_max: 1.0,
            output_gain: 0.01,
            routing: BetaRouting::default(),
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        self.routing.validate()?;
        let widths = self.encoder_hidden.iter().chain(&self.expert_hidden).chain(&self.critic_hidden);
        if self.latent_dim == 0 || widths.clone().any(|&w| w == 0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        if !(self.log_std_min < self.log_std_max)
            || !(self.log_std_min..=self.log_std_max).contains(&self.log_std_init)
        {
            return Err(Error::invalid("log_std_init must lie in [log_std_min, log_std_max]"));
        }
        Ok(())
    }
}

/// Value heads, one per reward stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticHead {
    Task,
    Obj1,
    Obj2,
}

impl CriticHead {
    pub const ALL: [CriticHead; 3] = [CriticHead::Task, CriticHead::Obj1, CriticHead::Obj2];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CriticHead::Task => "task",
            CriticHead::Obj1 => "obj1",
            CriticHead::Obj2 => "obj2",
        }
    }
}

/// Graph nodes produced by [`PolicyParams::actor_graph`].
#[derive(Debug, Clone, Copy)]
pub struct ActorNodes {
    pub mean: Var,
    /// Clamped log standard deviation, `1 × act_dim`.
    pub log_std: Var,
    /// Mixing weights, `n × EXPERT_COUNT`.
    pub weights: Var,
}

/// Actor and critic parameters for one environment.
///
/// The actor encodes the stacked history into a latent, runs every expert on
/// `[current observation, latent]` and mixes the expert means with
/// per-sample weights. Critics read the stacked history and share nothing
/// with the actor or each other.
#[derive(Debug, Clone)]
pub struct PolicyParams<F> {
    pub config: NetworkConfig,
    pub routing_mode: RoutingMode,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub stacked_dim: usize,
    pub store: ParamStore<F>,
    encoder: Mlp,
    experts: Vec<Mlp>,
    critics: Vec<Mlp>,
    gate: Option<Mlp>,
    log_std: usize,
    /// Return statistics per critic head, in [`CriticHead::ALL`] order.
    pub value_norm: [RunningStats; 3],
}

fn sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut v = vec![input];
    v.extend_from_slice(hidden);
    v.push(output);
    v
}

impl<F: Scalar> PolicyParams<F> {
    pub fn new(config: NetworkConfig, routing_mode: RoutingMode, spec: &EnvSpec, rng: &mut RngStream) -> Result<Self> {
        config.validate()?;
        let (obs, act, stacked) = (spec.obs_dim, spec.act_dim, spec.stacked_dim());
        let mut store = ParamStore::new();
        let encoder = Mlp::build(
            &mut store,
            "encoder",
            &sizes(stacked, &config.encoder_hidden, config.latent_dim),
            true,
            1.0,
            rng,
        );
        let experts = (0..EXPERT_COUNT)
            .map(|j| {
                Mlp::build(
                    &mut store,
                    &format!("expert{j}"),
                    &sizes(obs + config.latent_dim, &config.expert_hidden, act),
                    false,
                    config.output_gain,
                    rng,
                )
            })
            .collect();
        let log_std = store.insert("log_std", Array2::from_elem((1, act), <F as Scalar>::from_f64(config.log_std_init)));
        let critics = CriticHead::ALL
            .iter()
            .map(|h| {
                Mlp::build(
                    &mut store,
                    &format!("critic.{}", h.as_str()),
                    &sizes(stacked, &config.critic_hidden, 1),
                    false,
                    1.0,
                    rng,
                )
            })
            .collect();
        let gate = match routing_mode {
            RoutingMode::Beta => None,
            RoutingMode::Gate => {
                // zero init starts the gate at uniform mixing
                let w = store.insert("gate.0.weight", Array2::zeros((obs + 2, EXPERT_COUNT)));
                let b = store.insert("gate.0.bias", Array2::zeros((1, EXPERT_COUNT)));
                debug_assert_eq!(b, w + 1);
                Mlp::attach(&store, "gate", false)
            }
        };
        Ok(Self {
            config,
            routing_mode,
            obs_dim: obs,
            act_dim: act,
            stacked_dim: stacked,
            store,
            encoder,
            experts,
            critics,
            gate,
            log_std,
            value_norm: Default::default(),
        })
    }

    /// Builds a policy from tensors loaded elsewhere (e.g. a checkpoint).
    /// Names and shapes must match what [`PolicyParams::new`] would create;
    /// the result uses the canonical parameter order.
    pub fn from_store(
        config: NetworkConfig,
        routing_mode: RoutingMode,
        spec: &EnvSpec,
        store: ParamStore<F>,
    ) -> Result<Self> {
        let mut params = Self::new(config, routing_mode, spec, &mut RngStream::new(0))?;
        if params.store.len() != store.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                params.store.len(),
                store.len()
            )));
        }
        for i in 0..params.store.len() {
            let name = params.store.name(i).to_string();
            let j = store
                .lookup(&name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{name}`")))?;
            params.store.set(&name, store.get(j).clone())?;
        }
        Ok(params)
    }

    pub fn cast<G: Scalar>(&self) -> PolicyParams<G> {
        PolicyParams {
            config: self.config.clone(),
            routing_mode: self.routing_mode,
            obs_dim: self.obs_dim,
            act_dim: self.act_dim,
            stacked_dim: self.stacked_dim,
            store: self.store.cast(),
            encoder: self.encoder.clone(),
            experts: self.experts.clone(),
            critics: self.critics.clone(),
            gate: self.gate.clone(),
            log_std: self.log_std,
            value_norm: self.value_norm,
        }
    }

    /// Parameter slots grouped for gradient clipping: the actor, then one
    /// group per critic head.
    pub fn param_groups(&self) -> Vec<(&'static str, Vec<usize>)> {
        let mut actor: Vec<usize> = self.encoder.param_indices().collect();
        for e in &self.experts {
            actor.extend(e.param_indices());
        }
        if let Some(gate) = &self.gate {
            actor.extend(gate.param_indices());
        }
        actor.push(self.log_std);
        let mut groups = vec![("actor", actor)];
        for (h, c) in CriticHead::ALL.iter().zip(&self.critics) {
            groups.push((h.as_str(), c.param_indices().collect()));
        }
        groups
    }

    /// Beta routing weights as an `n × EXPERT_COUNT` tensor.
    pub fn beta_weights(&self, preferences: &[PreferenceVector]) -> Tensor<F> {
        let mut w = Array2::zeros((preferences.len(), EXPERT_COUNT));
        for (mut row, &p) in w.rows_mut().into_iter().zip(preferences) {
            let pw = beta_routing_weights(p, &self.config.routing);
            for (dst, v) in row.iter_mut().zip(pw) {
                *dst = <F as Scalar>::from_f64(v);
            }
        }
        w
    }

    fn check_input(&self, stacked: &Tensor<F>, n_prefs: usize) -> Result<()> {
        if stacked.ncols() != self.stacked_dim || stacked.nrows() != n_prefs {
            return Err(Error::ShapeMismatch {
                op: "actor",
                expected: format!("{n_prefs}x{}", self.stacked_dim),
                actual: format!("{}x{}", stacked.nrows(), stacked.ncols()),
            });
        }
        Ok(())
    }

    /// Builds the actor into `g`. `stacked` holds one oldest-to-newest history
    /// per row; the newest frame is the current observation.
    pub fn actor_graph(&self, g: &mut Graph<F>, stacked: Var, preferences: &[PreferenceVector]) -> ActorNodes {
        let current = g
            .value(stacked)
            .slice(s![.., self.stacked_dim - self.obs_dim..])
            .to_owned();
        let current = g.constant(current);
        let latent = self.encoder.forward(g, &self.store, stacked);
        let expert_in = g.concat_cols(&[current, latent]);
        let weights = match &self.gate {
            None => g.constant(self.beta_weights(preferences)),
            Some(gate) => {
                let mut lambda = Array2::zeros((preferences.len(), 2));
                for (mut row, p) in lambda.rows_mut().into_iter().zip(preferences) {
                    row[0] = <F as Scalar>::from_f64(p.first());
                    row[1] = <F as Scalar>::from_f64(p.second());
                }
                let lambda = g.constant(lambda);
                let input = g.concat_cols(&[current, lambda]);
                let logits = gate.forward(g, &self.store, input);
                g.softmax_rows(logits)
            }
        };
        let mut mean = None;
        for (j, expert) in self.experts.iter().enumerate() {
            let out = expert.forward(g, &self.store, expert_in);
            let wj = g.column(weights, j);
            let term = g.mul_col(out, wj);
            mean = Some(match mean {
                None => term,
                Some(m) => g.add(m, term),
            });
        }
        let raw = g.param(self.store.get(self.log_std).clone(), self.log_std);
        let log_std = g.clamp(
            raw,
            <F as Scalar>::from_f64(self.config.log_std_min),
            <F as Scalar>::from_f64(self.config.log_std_max),
        );
        ActorNodes {
            mean: mean.expect("at least one expert"),
            log_std,
            weights,
        }
    }

    /// Value prediction of one head in normalized units, `n × 1`.
    pub fn critic_graph(&self, g: &mut Graph<F>, stacked: Var, head: CriticHead) -> Var {
        self.critics[head.index()].forward(g, &self.store, stacked)
    }

    /// Log density of `actions` under the actor, `n × 1`.
    pub fn log_prob_graph(&self, g: &mut Graph<F>, nodes: &ActorNodes, actions: Var) -> Var {
        log_prob_graph(g, nodes.mean, nodes.log_std, actions)
    }

    pub fn actor_forward(&self, stacked: &Tensor<F>, preferences: &[PreferenceVector]) -> Result<ActionDistribution<F>> {
        self.check_input(stacked, preferences.len())?;
        let mut g = Graph::new();
        let x = g.constant(stacked.clone());
        let nodes = self.actor_graph(&mut g, x, preferences);
        g.check()?;
        Ok(ActionDistribution {
            mean: g.value(nodes.mean).clone(),
            std: g.value(nodes.log_std).iter().map(|v| v.exp()).collect(),
        })
    }

    /// Mixing weights the actor uses for each row.
    pub fn routing_weights(&self, stacked: &Tensor<F>, preferences: &[PreferenceVector]) -> Result<Tensor<F>> {
        self.check_input(stacked, preferences.len())?;
        let mut g = Graph::new();
        let x = g.constant(stacked.clone());
        let nodes = self.actor_graph(&mut g, x, preferences);
        Ok(g.value(nodes.weights).clone())
    }

    fn denormalize(&self, mut values: Tensor<F>) -> Tensor<F> {
        for (mut col, stats) in values.columns_mut().into_iter().zip(&self.value_norm) {
            col.mapv_inplace(|v| <F as Scalar>::from_f64(stats.denormalize(Scalar::to_f64(v))));
        }
        values
    }

    /// Values of all heads, `n × 3` in [`CriticHead::ALL`] order.
    pub fn critic_forward(&self, stacked: &Tensor<F>) -> Result<Tensor<F>> {
        self.check_input(stacked, stacked.nrows())?;
        let mut g = Graph::new();
        let x = g.constant(stacked.clone());
        let heads: Vec<Var> = CriticHead::ALL.iter().map(|&h| self.critic_graph(&mut g, x, h)).collect();
        let all = g.concat_cols(&heads);
        g.check()?;
        Ok(self.denormalize(g.value(all).clone()))
    }

    /// Actor distribution and all critic values in one pass.
    pub fn forward(
        &self,
        stacked: &Tensor<F>,
        preferences: &[PreferenceVector],
    ) -> Result<(ActionDistribution<F>, Tensor<F>)> {
        self.check_input(stacked, preferences.len())?;
        let mut g = Graph::new();
        let x = g.constant(stacked.clone());
        let nodes = self.actor_graph(&mut g, x, preferences);
        let heads: Vec<Var> = CriticHead::ALL.iter().map(|&h| self.critic_graph(&mut g, x, h)).collect();
        let values = g.concat_cols(&heads);
        g.check()?;
        Ok((
            ActionDistribution {
                mean: g.value(nodes.mean).clone(),
                std: g.value(nodes.log_std).iter().map(|v| v.exp()).collect(),
            },
            self.denormalize(g.value(values).clone()),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{EnvName, EnvParams};

    fn spec(name: EnvName) -> EnvSpec {
        EnvParams::default().spec(name)
    }

    fn random_input(n: usize, dim: usize, rng: &mut RngStream) -> (Tensor<f64>, Vec<PreferenceVector>) {
        let x = Array2::from_shape_fn((n, dim), |_| rng.uniform_range(-1.0, 1.0));
        let p = (0..n).map(|_| PreferenceVector::from_first(rng.uniform()).unwrap()).collect();
        (x, p)
    }

    #[test]
    fn shapes_and_init() {
        let sp = spec(EnvName::Glide);
        let p = PolicyParams::<f32>::new(NetworkConfig::default(), RoutingMode::Beta, &sp, &mut RngStream::new(3)).unwrap();
        let e = p.store.get(p.store.lookup("encoder.0.weight").unwrap());
        assert_eq!(e.dim(), (72, 64));
        let x = p.store.get(p.store.lookup("expert2.0.weight").unwrap());
        assert_eq!(x.dim(), (12 + 32, 64));
        assert!(p.store.iter().filter(|(n, _)| n.ends_with("bias")).all(|(_, t)| t.iter().all(|&v| v == 0.0)));
        assert!(p.store.lookup("gate.0.weight").is_none());
        let ls = p.store.get(p.store.lookup("log_std").unwrap());
        assert_eq!(ls.dim(), (1, 2));
        let groups = p.param_groups();
        assert_eq!(groups.len(), 4);
        let total: usize = groups.iter().map(|(_, g)| g.len()).sum();
        assert_eq!(total, p.store.len());
    }

    #[test]
    fn batch_matches_row_by_row() {
        let sp = spec(EnvName::Upright);
        let mut rng = RngStream::new(5);
        let p = PolicyParams::<f64>::new(NetworkConfig::default(), RoutingMode::Beta, &sp, &mut rng).unwrap();
        let (x, prefs) = random_input(8, sp.stacked_dim(), &mut rng);
        let (dist, values) = p.forward(&x, &prefs).unwrap();
        for i in 0..8 {
            let xi = x.slice(s![i..i + 1, ..]).to_owned();
            let d = p.actor_forward(&xi, &prefs[i..i + 1]).unwrap();
            let v = p.critic_forward(&xi).unwrap();
            assert!((d.mean[[0, 0]] - dist.mean[[i, 0]]).abs() < 1e-12);
            for h in 0..3 {
                assert!((v[[0, h]] - values[[i, h]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identical_experts_ignore_preference() {
        let sp = spec(EnvName::Glide);
        let mut rng = RngStream::new(8);
        let mut p = PolicyParams::<f64>::new(NetworkConfig::default(), RoutingMode::Beta, &sp, &mut rng).unwrap();
        let names: Vec<String> = p
            .store
            .iter()
            .filter(|(n, _)| n.starts_with("expert0."))
            .map(|(n, _)| n.to_string())
            .collect();
        for n in &names {
            let t = p.store.get(p.store.lookup(n).unwrap()).mapv(|v| v * 50.0);
            for j in 0..EXPERT_COUNT {
                p.store.set(&n.replace("expert0", &format!("expert{j}")), t.clone()).unwrap();
            }
        }
        let (x, _) = random_input(1, sp.stacked_dim(), &mut rng);
        let a = p.actor_forward(&x, &[PreferenceVector::from_first(0.0).unwrap()]).unwrap();
        let b = p.actor_forward(&x, &[PreferenceVector::from_first(1.0).unwrap()]).unwrap();
        for (u, v) in a.mean.iter().zip(b.mean.iter()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn preference_steers_mixture() {
        let sp = spec(EnvName::Upright);
        let cfg = NetworkConfig {
            routing: BetaRouting {
                scale: 100.0,
                ..Default::default()
            },
            ..Default::default()
        };
        let mode = RoutingMode::Beta;
        let mut rng = RngStream::new(2);
        let p = PolicyParams::<f64>::new(cfg, mode, &sp, &mut rng).unwrap();
        let (x, _) = random_input(1, sp.stacked_dim(), &mut rng);
        let w = p.routing_weights(&x, &[PreferenceVector::from_first(1.0).unwrap()]).unwrap();
        assert!(w[[0, 4]] > 0.99);
    }

    #[test]
    fn gate_starts_uniform() {
        let sp = spec(EnvName::Upright);
        let (cfg, mode) = (NetworkConfig::default(), RoutingMode::Gate);
        let mut rng = RngStream::new(2);
        let p = PolicyParams::<f64>::new(cfg, mode, &sp, &mut rng).unwrap();
        let (x, prefs) = random_input(3, sp.stacked_dim(), &mut rng);
        let w = p.routing_weights(&x, &prefs).unwrap();
        assert!(w.iter().all(|&v| (v - 0.2).abs() < 1e-12));
    }

    #[test]
    fn log_std_is_clamped() {
        let sp = spec(EnvName::Upright);
        let mut rng = RngStream::new(2);
        let mut p = PolicyParams::<f64>::new(NetworkConfig::default(), RoutingMode::Beta, &sp, &mut rng).unwrap();
        p.store.set("log_std", Array2::from_elem((1, 1), 7.0)).unwrap();
        let (x, prefs) = random_input(1, sp.stacked_dim(), &mut rng);
        let d = p.actor_forward(&x, &prefs).unwrap();
        assert!((d.std[0] - 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn rebinding_and_shape_errors() {
        let sp = spec(EnvName::Upright);
        let p = PolicyParams::<f32>::new(NetworkConfig::default(), RoutingMode::Beta, &sp, &mut RngStream::new(1)).unwrap();
        let q = PolicyParams::from_store(NetworkConfig::default(), RoutingMode::Beta, &sp, p.store.clone()).unwrap();
        assert_eq!(q.param_groups(), p.param_groups());
        let glide = spec(EnvName::Glide);
        assert!(PolicyParams::from_store(NetworkConfig::default(), RoutingMode::Beta, &glide, p.store.clone()).is_err());
        let bad = Array2::zeros((2, 42));
        assert!(p.actor_forward(&bad, &[PreferenceVector::balanced()]).is_err());
    }
}
