mod args;
mod commands;
mod config;

use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use args::{Cli, Command};

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("BEAMKIT_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("BEAMKIT_THREADS must be a positive integer, got '{raw}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the thread pool")?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let config = cli.config.as_deref();
    match cli.command {
        Command::Design(a) => commands::design(config::apply(a, config)?),
        Command::Beampattern(a) => commands::beampattern(config::apply(a, config)?),
        Command::Wng(a) => commands::wng(config::apply(a, config)?),
        Command::SynthHrtf(a) => commands::synth_hrtf(config::apply(a, config)?),
        Command::Simulate(a) => commands::simulate(config::apply(a, config)?),
        Command::Sweep(a) => commands::sweep(config::apply(a, config)?),
    }
}

/// 1 for internal failures of the library, 2 for everything caused by input.
fn exit_code(err: &anyhow::Error) -> u8 {
    let internal = err
        .chain()
        .filter_map(|e| e.downcast_ref::<beamkit::Error>())
        .any(|e| !e.is_user_error());
    if internal {
        1
    } else {
        2
    }
}

/// The error chain, skipping causes whose text the outer message already shows.
fn describe(err: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if !text.contains(&msg) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&msg);
        }
    }
    text
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            log::error!("{}", describe(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}
