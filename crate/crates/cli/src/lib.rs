//! Command-line driver: argument parsing, config layering, subcommands and
//! exit-code mapping.

pub mod args;
pub mod commands;
pub mod config;

use gdcycles::Error;

pub use args::Cli;
pub use config::RunConfig;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_SEPARABLE: u8 = 2;
pub const EXIT_DIVERGED: u8 = 3;
pub const EXIT_INVARIANT: u8 = 4;

pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<commands::InvariantViolation>().is_some() {
        return EXIT_INVARIANT;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Separable(_)) => EXIT_SEPARABLE,
        Some(Error::Diverged { .. } | Error::NonFinite(_)) => EXIT_DIVERGED,
        Some(Error::LemmaViolation { .. } | Error::NoConvergence { .. } | Error::BracketFailure(_)) => EXIT_INVARIANT,
        _ => EXIT_USAGE,
    }
}

/// Runs a parsed command line and returns the report printed to stdout.
pub fn run(cli: Cli) -> anyhow::Result<String> {
    let config = cli.effective_config()?;
    match &cli.command {
        args::Command::Solve { .. } => commands::cmd_solve(&config),
        args::Command::Run { .. } => commands::cmd_run(&config),
        args::Command::Analyze1d { sweep, .. } => commands::cmd_analyze_1d(&config, *sweep),
        args::Command::Lift { .. } => commands::cmd_lift(&config),
        args::Command::Hunt { .. } => commands::cmd_hunt(&config),
        args::Command::Scale { .. } => commands::cmd_scale(&config),
        args::Command::Verify { suite, quick } => {
            let effort = if *quick { gdcycles::Effort::Quick } else { gdcycles::Effort::Full };
            commands::cmd_verify(&config, suite, effort)
        }
        args::Command::Spectrum { column, .. } => commands::cmd_spectrum(&config, column),
    }
}
