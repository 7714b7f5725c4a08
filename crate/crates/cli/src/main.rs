mod args;
mod commands;
mod exit;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::cmd_train(a),
        Command::TrainFixed(a) => commands::cmd_train_fixed(a),
        Command::Eval(a) => commands::cmd_eval(a),
        Command::Sweep(a) => commands::cmd_sweep(a),
        Command::Metrics(a) => commands::cmd_metrics(a),
        Command::SwitchDemo(a) => commands::cmd_switch_demo(a),
        Command::Serve(a) => commands::cmd_serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
