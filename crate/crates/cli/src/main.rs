//! `cosmic` command-line interface.

mod args;
mod eval;
mod report;
mod settings;
mod train;

use std::path::Path;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use serde::Serialize;

use args::{Cli, Command};

/// Command failure, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config values or referenced paths (exit 2).
    Usage(anyhow::Error),
    /// Failure while running (exit 1).
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        let config_error = e.chain().any(|cause| {
            matches!(
                cause.downcast_ref::<cosmic_core::Error>(),
                Some(
                    cosmic_core::Error::InvalidParameter(_)
                        | cosmic_core::Error::InvalidSplit(_)
                        | cosmic_core::Error::InfeasibleTask(_)
                )
            )
        });
        if config_error {
            CliError::Usage(e)
        } else {
            CliError::Runtime(e)
        }
    }
}

impl From<cosmic_core::Error> for CliError {
    fn from(e: cosmic_core::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Sizes the global thread pool; 0 keeps the default.
pub fn init_workers(workers: usize) -> anyhow::Result<()> {
    if workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .context("cannot configure worker threads")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("COSMIC_LOG", "info").write_style("COSMIC_LOG_STYLE"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Report(a) => report::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
