//! platoon: simulate strings of agents coupled by singular alignment and
//! decentralized spacing control, and check the runs against their
//! certificates.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{BlowupArgs, ReproduceArgs, SelectArgs, SweepArgs};

#[derive(Parser)]
#[command(
    name = "platoon",
    version,
    about = "Nearest-neighbor alignment and formation control on the line"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one scenario; write the trace, certificates, and plot data.
    Run(SelectArgs),
    /// Evaluate the initial-data certificates without integrating.
    Check(SelectArgs),
    /// Run a scenario once per parameter value and tabulate the outcomes.
    Sweep(SweepArgs),
    /// Run the finite-time collision suite against its analytic bounds.
    Blowup(BlowupArgs),
    /// Run every built-in scenario and score it against its expectations.
    Reproduce(ReproduceArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => commands::cmd_run(args),
        Command::Check(args) => commands::cmd_check(args),
        Command::Sweep(args) => commands::cmd_sweep(args),
        Command::Blowup(args) => commands::cmd_blowup(args),
        Command::Reproduce(args) => commands::cmd_reproduce(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::from(1)
        }
    }
}
