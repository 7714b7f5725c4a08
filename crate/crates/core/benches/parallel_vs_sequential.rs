use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pcmorl_core::envs::{EnvName, EnvParams};
use pcmorl_core::eval::{evaluate, EvalSetup};
use pcmorl_core::io::RunConfig;
use pcmorl_core::nn::{NetworkConfig, PolicyParams, RoutingMode};
use pcmorl_core::pareto::{monte_carlo_hypervolume, ParetoSet};
use pcmorl_core::preference::{ObjectiveVector, PreferenceVector};
use pcmorl_core::rng::RngStream;
use pcmorl_core::train::{collect_rollouts, compute_advantages, ppo_update, Adam, RolloutState};
use pcmorl_core::Execution;

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn rollout_and_update(c: &mut Criterion) {
    let mut group = c.benchmark_group("train_iteration");
    group.sample_size(10);
    for mode in MODES {
        let mut run = RunConfig::new(EnvName::Upright);
        run.train.n_envs = 16;
        run.train.horizon = 64;
        run.train.execution = mode;
        let spec = run.env_params.spec(run.env);
        let policy = PolicyParams::new(run.network.clone(), RoutingMode::Beta, &spec, &mut RngStream::new(0)).unwrap();
        group.bench_function(BenchmarkId::new("rollout", format!("{mode:?}")), |b| {
            let mut state = RolloutState::new(run.env, &run.env_params, &run.train, &RngStream::new(1)).unwrap();
            b.iter(|| collect_rollouts(&policy, &mut state, &run.train, false).unwrap())
        });
        group.bench_function(BenchmarkId::new("update", format!("{mode:?}")), |b| {
            let mut state = RolloutState::new(run.env, &run.env_params, &run.train, &RngStream::new(1)).unwrap();
            let batch = collect_rollouts(&policy, &mut state, &run.train, false).unwrap();
            let adv = compute_advantages(&batch, &run.train).unwrap();
            b.iter(|| {
                let mut p = policy.clone();
                let mut opt = Adam::new(p.store.tensors(), run.train.learning_rate);
                ppo_update(&mut p, &mut opt, &batch, &adv, &run.train, &mut RngStream::new(2)).unwrap()
            })
        });
    }
    group.finish();
}

fn evaluation(c: &mut Criterion) {
    let mut group = c.benchmark_group("evaluate");
    group.sample_size(10);
    let params = EnvParams::default();
    let spec = params.spec(EnvName::Glide);
    let policy = PolicyParams::new(NetworkConfig::default(), RoutingMode::Beta, &spec, &mut RngStream::new(0)).unwrap();
    for mode in MODES {
        let setup = EvalSetup {
            policy: &policy,
            env: EnvName::Glide,
            params: &params,
            episodes: 16,
            seed: 3,
            execution: mode,
        };
        group.bench_function(format!("{mode:?}"), |b| {
            b.iter(|| evaluate(&setup, PreferenceVector::balanced()).unwrap())
        });
    }
    group.finish();
}

fn hypervolume_estimate(c: &mut Criterion) {
    let mut group = c.benchmark_group("monte_carlo_hypervolume");
    let points = (0..20)
        .map(|k| {
            let x = k as f64 / 19.0;
            ObjectiveVector::pair(x, (1.0 - x * x).sqrt()).unwrap()
        })
        .collect();
    let set = ParetoSet::new(points, ObjectiveVector::pair(0.0, 0.0).unwrap()).unwrap();
    for mode in MODES {
        group.bench_function(format!("{mode:?}"), |b| {
            b.iter(|| monte_carlo_hypervolume(&set, 200_000, 8, &RngStream::new(5), mode).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, rollout_and_update, evaluation, hypervolume_estimate);
criterion_main!(benches);
