mod args;
mod commands;
mod config;
mod io;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use io::{CliError, CliResult};

fn run() -> CliResult<()> {
    let argv = config::merged_args(std::env::args_os().collect())?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => {
            let text = e.render().to_string();
            let text = text.trim_end().strip_prefix("error: ").unwrap_or(text.trim_end());
            return Err(CliError::Usage(text.to_owned()));
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Usage("--threads must be ≥ 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Solve(a) => commands::cmd_solve(a),
        Command::Experiment(a) => commands::cmd_experiment(a),
        Command::Diagnose(a) => commands::cmd_diagnose(a),
        Command::VerifyCondition(a) => commands::cmd_verify_condition(a),
        Command::Project(a) => commands::cmd_project(a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
