//! `thermaltap` command line.
//!
//! Exit codes: 0 success, 1 usage error (bad flags, invalid flag
//! combinations, impossible fold plans), 2 data error (missing or malformed
//! datasets, failed folds).

mod args;
mod commands;
mod data;

use std::process::ExitCode;

use clap::Parser;
use thermaltap::config::ConfigError;
use thermaltap::eval::{EvalError, PlanError};

use args::{Cli, Command};

/// A usage error; maps to exit code 1.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() || cause.is::<ConfigError>() || cause.is::<PlanError>() {
            return 1;
        }
        if let Some(EvalError::Plan(_) | EvalError::Config(_)) = cause.downcast_ref::<EvalError>() {
            return 1;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(1);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .expect("thread pool is configured once");
    }
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Segment(a) => commands::segment(a),
        Command::Extract(a) => commands::extract(a),
        Command::Train(a) => commands::train(a),
        Command::Infer(a) => commands::infer(a),
        Command::Eval(a) => commands::eval(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
