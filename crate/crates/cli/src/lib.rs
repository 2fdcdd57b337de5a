//! Command-line front end of `stackmeta`: argument parsing, subcommands and
//! output files.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 numerical
//! failure (divergence, singular matrices, failed gradient checks).

mod commands;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "stackmeta", version, about = "Stackelberg meta-learning experiments for guided cooperative control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// TOML run configuration; the built-in robot-teaming setup if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding STACKMETA_OUT and the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Meta-train a response model.
    Train(#[command(flatten)] Common),
    /// Adapt a meta model to every follower type and evaluate it.
    Adapt {
        #[command(flatten)]
        common: Common,
        /// Meta model artifact; trained in-line if omitted.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Monte-Carlo evaluation of a stored model against every type.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// Rollouts per type; the configured mc_runs if omitted.
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Learn from the guidance cost alone (γ = 0).
    BaselineUnilateral(#[command(flatten)] Common),
    /// Train one standalone model per type, plus the transfer baseline.
    BaselineIndividual(#[command(flatten)] Common),
    /// Compare meta-adaptation with adapting the source type's individual model.
    Transfer {
        #[command(flatten)]
        common: Common,
        /// Meta model artifact; trained in-line if omitted.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Finite-difference checks of all analytic derivatives.
    CheckGradients(#[command(flatten)] Common),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<stackmeta_core::Error>() {
            return if e.is_numerical() { 2 } else { 1 };
        }
        if cause.downcast_ref::<commands::ChecksFailed>().is_some() {
            return 2;
        }
    }
    1
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Train(c) => commands::train(&c),
        Command::Adapt { common, model } => commands::adapt(&common, model.as_deref()),
        Command::Simulate { common, model, runs } => commands::simulate(&common, &model, runs),
        Command::BaselineUnilateral(c) => commands::unilateral(&c),
        Command::BaselineIndividual(c) => commands::individual(&c),
        Command::Transfer { common, model } => commands::transfer(&common, model.as_deref()),
        Command::CheckGradients(c) => commands::check_gradients(&c),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
