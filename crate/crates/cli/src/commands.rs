use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use pcmorl_core::eval::{evaluate, switch_demo, sweep, Controller, EvalSetup, SweepRow};
use pcmorl_core::io::{front_metrics, read_sweep_csv, write_sweep_csv, Checkpoint, RunConfig};
use pcmorl_core::nn::PolicyParams;
use pcmorl_core::preference::clamp_simplex;
use pcmorl_core::rng::RngStream;
use pcmorl_core::train::{train, MetricRecord, TrainSink};
use pcmorl_core::Execution;
use pcmorl_steer::{ServeOptions, Session, SteerServer};
use serde::Serialize;

use crate::args::{CheckpointArgs, EvalArgs, MetricsArgs, ServeArgs, SweepArgs, SwitchArgs, TrainArgs, TrainFixedArgs};
use crate::exit::{Failure, ResultExt};

/// Writes `metrics.ndjson` and checkpoints into the run directory.
struct DirSink<'a> {
    dir: PathBuf,
    run: &'a RunConfig,
    metrics: BufWriter<File>,
}

impl<'a> DirSink<'a> {
    fn create(run: &'a RunConfig) -> Result<Self> {
        let dir = run.output_dir.clone();
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        run.save(&dir.join("config.json"))?;
        let path = dir.join("metrics.ndjson");
        let metrics = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        Ok(Self { dir, run, metrics })
    }
}

impl TrainSink for DirSink<'_> {
    fn metric(&mut self, record: &MetricRecord) -> pcmorl_core::Result<()> {
        let line = serde_json::to_string(record)?;
        let io = |e| pcmorl_core::Error::Io {
            path: self.dir.join("metrics.ndjson"),
            source: e,
        };
        writeln!(self.metrics, "{line}").map_err(io)?;
        self.metrics.flush().map_err(io)
    }

    fn checkpoint(&mut self, iteration: usize, policy: &PolicyParams<f32>) -> pcmorl_core::Result<()> {
        let ckpt = Checkpoint::from_policy(self.run, policy, iteration);
        ckpt.save(&self.dir.join(format!("ckpt_{iteration:06}.json")))?;
        ckpt.save(&self.dir.join("checkpoint.json"))
    }
}

fn resolve_config(args: &TrainArgs) -> Result<RunConfig, Failure> {
    let mut run = match &args.config {
        Some(path) => RunConfig::load(path).usage()?,
        None => RunConfig::new(args.env.unwrap_or(pcmorl_core::envs::EnvName::Upright)),
    };
    if let Some(env) = args.env {
        run.env = env;
    }
    if let Some(seed) = args.seed {
        run.seed = seed;
    }
    if let Some(n) = args.iterations {
        run.train.iterations = n;
    }
    if let Some(out) = &args.out {
        run.output_dir = out.clone();
    }
    run.validate().usage()?;
    Ok(run)
}

fn run_training(run: &RunConfig) -> Result<(), Failure> {
    let mut sink = DirSink::create(run).other()?;
    match train(run.clone(), &mut sink) {
        Ok(_) => Ok(()),
        Err(e @ pcmorl_core::Error::TrainingAborted { .. }) => Err(Failure::abort(e)),
        Err(e) => Err(Failure::other(e)),
    }
}

pub fn cmd_train(args: TrainArgs) -> Result<(), Failure> {
    let run = resolve_config(&args)?;
    run_training(&run)?;
    eprintln!("wrote {}", run.output_dir.join("checkpoint.json").display());
    Ok(())
}

#[derive(Serialize)]
struct FixedComparison {
    preference: [f64; 2],
    fixed: SweepRow,
    #[serde(skip_serializing_if = "Option::is_none")]
    conditioned: Option<SweepRow>,
}

pub fn cmd_train_fixed(args: TrainFixedArgs) -> Result<(), Failure> {
    let pref = clamp_simplex(args.pref).usage()?;
    let mut run = resolve_config(&args.train)?;
    run.train.fixed_preference = Some(pref);
    run_training(&run)?;

    let ckpt = Checkpoint::load(&run.output_dir.join("checkpoint.json")).other()?;
    let fixed_policy = ckpt.policy().other()?;
    let row = |policy: &PolicyParams<f32>| -> Result<SweepRow, Failure> {
        let setup = EvalSetup {
            policy,
            env: run.env,
            params: &run.env_params,
            episodes: args.episodes,
            seed: run.seed,
            execution: Execution::default(),
        };
        Ok(evaluate(&setup, pref).usage()?.row)
    };
    let conditioned = match &args.ckpt {
        Some(path) => {
            let (policy, _) = load_policy(&CheckpointArgs {
                ckpt: path.clone(),
                env: Some(run.env),
                seed: run.seed,
            })?;
            Some(row(&policy)?)
        }
        None => None,
    };
    let report = FixedComparison {
        preference: pref.weights(),
        fixed: row(&fixed_policy)?,
        conditioned,
    };
    let text = serde_json::to_string_pretty(&report).other()?;
    fs::write(run.output_dir.join("comparison.json"), &text).other()?;
    println!("{text}");
    Ok(())
}

/// Loads a checkpoint, rejecting it when `--env` disagrees with the run
/// that produced it.
fn load_policy(args: &CheckpointArgs) -> Result<(PolicyParams<f32>, RunConfig), Failure> {
    let ckpt = Checkpoint::load(&args.ckpt).usage()?;
    if let Some(env) = args.env {
        if env != ckpt.run_config.env {
            return Err(Failure::usage(anyhow::anyhow!(
                "checkpoint {} was trained on {}, not {env}",
                args.ckpt.display(),
                ckpt.run_config.env
            )));
        }
    }
    let policy = ckpt.policy().usage()?;
    Ok((policy, ckpt.run_config))
}

pub fn cmd_eval(args: EvalArgs) -> Result<(), Failure> {
    let (policy, run) = load_policy(&args.source)?;
    let pref = clamp_simplex(args.pref).usage()?;
    let setup = EvalSetup {
        policy: &policy,
        env: run.env,
        params: &run.env_params,
        episodes: args.episodes,
        seed: args.source.seed,
        execution: Execution::default(),
    };
    let e = evaluate(&setup, pref).usage()?;
    println!("{}", serde_json::to_string(&e.row).other()?);
    Ok(())
}

pub fn cmd_sweep(args: SweepArgs) -> Result<(), Failure> {
    let (policy, run) = load_policy(&args.source)?;
    let setup = EvalSetup {
        policy: &policy,
        env: run.env,
        params: &run.env_params,
        episodes: args.episodes,
        seed: args.source.seed,
        execution: Execution::default(),
    };
    let rows: Vec<SweepRow> = sweep(&setup, args.points).usage()?.into_iter().map(|e| e.row).collect();
    write_sweep_csv(&args.out, run.env, &rows).other()?;
    eprintln!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}

pub fn cmd_metrics(args: MetricsArgs) -> Result<(), Failure> {
    let table = read_sweep_csv(&args.csv).usage()?;
    let names: Vec<&str> = args.objectives.split(',').map(str::trim).collect();
    let [a, b] = names.as_slice() else {
        return Err(Failure::usage(anyhow::anyhow!(
            "--objectives needs two column names, got `{}`",
            args.objectives
        )));
    };
    let m = front_metrics(&table, [a, b], &args.flip, args.reference).usage()?;
    println!("{}", serde_json::to_string_pretty(&m).other()?);
    Ok(())
}

pub fn cmd_switch_demo(args: SwitchArgs) -> Result<(), Failure> {
    let (policy, run) = load_policy(&args.source)?;
    let before = clamp_simplex(args.before).usage()?;
    let after = clamp_simplex(args.after).usage()?;
    let horizon = run.env_params.spec(run.env).horizon;
    let t_switch = args.t_switch.unwrap_or(horizon / 2);
    let demo = switch_demo(&policy, run.env, &run.env_params, args.source.seed, t_switch, before, after).usage()?;
    let text = serde_json::to_string(&demo).other()?;
    if let Some(out) = &args.out {
        write_file(out, &text)?;
    }
    println!("{text}");
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .other()
}

pub fn cmd_serve(args: ServeArgs) -> Result<(), Failure> {
    let (policy, run) = load_policy(&args.source)?;
    let pref = clamp_simplex(args.pref).usage()?;
    if !(args.speed.is_finite() && args.speed > 0.0) {
        return Err(Failure::usage(anyhow::anyhow!("--speed must be positive")));
    }
    let params = run.env_params.with_disturbances(!args.no_disturbances);
    let dt = params.spec(run.env).dt;
    let ctl = Controller::new(policy, run.env, &params, RngStream::new(args.source.seed), pref).usage()?;
    let session = Session::new(ctl, dt, args.speed);
    let runtime = tokio::runtime::Runtime::new().other()?;
    runtime.block_on(async {
        let server = SteerServer::bind(
            session,
            ServeOptions {
                port: args.port,
                static_dir: Some(args.ui_dir.clone()),
            },
        )
        .await
        .usage()?;
        eprintln!("serving {} on ws://{}/ws", run.env, server.local_addr().other()?);
        server.run().await.other()
    })
}
