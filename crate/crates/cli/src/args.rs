use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use pcmorl_core::envs::EnvName;

#[derive(Debug, Parser)]
#[command(name = "pcmorl", version, about = "Preference-conditioned multi-objective PPO")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a preference-conditioned policy.
    Train(TrainArgs),
    /// Train with the preference pinned, then compare against a conditioned checkpoint.
    TrainFixed(TrainFixedArgs),
    /// Evaluate a checkpoint at one preference; prints a sweep row as JSON.
    Eval(EvalArgs),
    /// Evaluate a checkpoint on the simplex grid and write a CSV.
    Sweep(SweepArgs),
    /// Hypervolume and sparsity of two columns of a sweep CSV.
    Metrics(MetricsArgs),
    /// One episode whose preference flips mid-way; prints a JSON time series.
    SwitchDemo(SwitchArgs),
    /// Serve a checkpoint over WebSocket at /ws.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Run config (JSON). Defaults are used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub env: Option<EnvName>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Output directory (overrides the config's `output_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainFixedArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    /// Pinned preference `a,b`.
    #[arg(long, value_parser = parse_pair)]
    pub pref: [f64; 2],
    /// Conditioned checkpoint to compare against at the same preference.
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub episodes: usize,
}

#[derive(Debug, Args)]
pub struct CheckpointArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Expected environment; a checkpoint trained elsewhere is rejected.
    #[arg(long)]
    pub env: Option<EnvName>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub source: CheckpointArgs,
    #[arg(long, value_parser = parse_pair, default_value = "0.5,0.5")]
    pub pref: [f64; 2],
    #[arg(long, default_value_t = 100)]
    pub episodes: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: CheckpointArgs,
    #[arg(long, default_value_t = 5)]
    pub points: usize,
    #[arg(long, default_value_t = 100)]
    pub episodes: usize,
    #[arg(long, default_value = "sweep.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Sweep CSV written by `sweep`.
    pub csv: PathBuf,
    /// Two column names, `a,b`.
    #[arg(long, default_value = "obj1_return,obj2_return")]
    pub objectives: String,
    /// Reference point `a,b` in the (flipped) objective space.
    #[arg(long = "ref", value_parser = parse_pair)]
    pub reference: Option<[f64; 2]>,
    /// Lower-is-better column to negate; repeatable or comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub flip: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SwitchArgs {
    #[command(flatten)]
    pub source: CheckpointArgs,
    /// Step at which the preference changes (default: half the horizon).
    #[arg(long)]
    pub t_switch: Option<usize>,
    #[arg(long, value_parser = parse_pair, default_value = "0,1")]
    pub before: [f64; 2],
    #[arg(long, value_parser = parse_pair, default_value = "1,0")]
    pub after: [f64; 2],
    /// Also write the series to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub source: CheckpointArgs,
    #[arg(long, default_value_t = 8765)]
    pub port: u16,
    /// Initial speed multiplier.
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
    #[arg(long, value_parser = parse_pair, default_value = "0.5,0.5")]
    pub pref: [f64; 2],
    #[arg(long)]
    pub no_disturbances: bool,
    /// Built UI served at `/` when the directory exists.
    #[arg(long, default_value = "ui/dist")]
    pub ui_dir: PathBuf,
}

pub fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [a, b] = parts.as_slice() else {
        return Err(format!("expected `a,b`, got `{s}`"));
    };
    let parse = |v: &str| v.parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok([parse(a)?, parse(b)?])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs() {
        assert_eq!(parse_pair("0.3,0.7"), Ok([0.3, 0.7]));
        assert_eq!(parse_pair(" 1 , 0 "), Ok([1.0, 0.0]));
        assert!(parse_pair("1").is_err());
        assert!(parse_pair("1,2,3").is_err());
        assert!(parse_pair("a,1").is_err());
    }

    #[test]
    fn parses_every_command() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
        let cli = Cli::try_parse_from(["pcmorl", "metrics", "s.csv", "--flip", "avg_energy,traj_deviation", "--ref", "0,0"]).unwrap();
        let Command::Metrics(m) = cli.command else { panic!() };
        assert_eq!(m.flip, vec!["avg_energy", "traj_deviation"]);
        assert_eq!(m.reference, Some([0.0, 0.0]));
    }
}
