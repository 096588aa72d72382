//! `f2f` command-line tool.
//!
//! Exit codes: 0 success, 1 quality gate unmet, 2 usage error, 3 data
//! error, 4 numerical failure.

mod cli;
mod commands;
mod manifest;

use clap::Parser;
use cli::{Cli, Command};
use f2f_core::Error;

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_) | Error::UnknownNoiseKind(_) | Error::SpecParse(_) => 2,
        Error::NonFinite { .. } | Error::NumericalFailure { .. } => 4,
        _ => 3,
    }
}

fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| {
        std::env::var("F2F_SEED")
            .ok()
            .and_then(|v| v.parse::<u64>().ok())
    })
    .unwrap_or(0)
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    let seed = resolve_seed(cli.seed);
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            log::warn!("could not configure thread pool: {e}");
        }
    }
    let threads = rayon::current_num_threads();

    let result = match &cli.command {
        Command::Synth(args) => commands::cmd_synth(args, seed, threads),
        Command::Corrupt(args) => commands::cmd_corrupt(args, seed, threads),
        Command::Pretrain(args) => commands::cmd_pretrain(args, seed, threads),
        Command::Finetune(args) => commands::cmd_finetune(args, seed, threads),
        Command::Denoise(args) => commands::cmd_denoise(args, seed, threads),
        Command::Flow(args) => commands::cmd_flow(args, seed, threads),
        Command::Eval(args) => commands::cmd_eval(args, seed, threads),
    };

    match result {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}
