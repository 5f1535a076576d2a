//! `warpcone`: deterministic driver for the warped-cone experiments.
//!
//! Exit status is 0 when every check passes, 2 when a numerical check fails
//! and 1 on configuration or input errors.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use clap::{CommandFactory, FromArgMatches, Parser};
use warpcone::WarpError;

use commands::{CommandRegistry, Context};
use config::RunConfig;
use report::Run;

#[derive(Debug, Parser)]
#[command(name = "warpcone", version, about = "Numerical experiments on discretized warped cones")]
struct Cli {
    /// Command to run (see the list below).
    command: String,
    /// JSON config; flags given on the command line override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: RunConfig,
}

enum Outcome {
    Pass,
    Fail,
}

fn execute(registry: &CommandRegistry, cli: &Cli) -> Result<Outcome> {
    let command = registry.get(&cli.command).with_context(|| {
        let known: Vec<_> = registry.iter().map(|c| c.name()).collect();
        format!("unknown command '{}' (known: {})", cli.command, known.join(", "))
    })?;
    let config = RunConfig::load(cli.config.as_deref(), &cli.flags)?;
    let mut run = Run::new(command.name(), &config)?;
    command.run(&Context::default(), &config, &mut run)?;
    let dir = config.out_dir();
    run.write(&dir)?;
    for check in run.checks() {
        println!("{} {}: {}", if check.pass { "PASS" } else { "FAIL" }, check.name, check.detail);
    }
    println!("wrote {}", dir.display());
    Ok(if run.passed() { Outcome::Pass } else { Outcome::Fail })
}

fn main() -> ExitCode {
    let registry = CommandRegistry::builtin();
    let listing: String = registry
        .iter()
        .map(|c| format!("  {:<11} {}\n", c.name(), c.about()))
        .collect();
    let matches = Cli::command().after_help(format!("Commands:\n{listing}")).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match execute(&registry, &cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            let numerical = e
                .downcast_ref::<WarpError>()
                .is_some_and(|w| matches!(w, WarpError::NonConvergence { .. }));
            ExitCode::from(if numerical { 2 } else { 1 })
        }
    }
}
