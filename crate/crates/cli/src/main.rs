//! Command-line front end for the inflation library: closed-form
//! predictors, quadrature, and reproducible Monte Carlo, all emitting
//! machine-readable tables plus a run manifest.

mod commands;
mod manifest;
mod table;

use clap::{Parser, Subcommand};
use commands::CommandOutput;
use manifest::RunManifest;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

/// Errors surfaced to the shell. Usage problems exit 2, numerical failures
/// exit 3, I/O failures exit 1; a completed run whose checked invariant
/// failed exits 4 after the table is written.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Numerical(msg) | CliError::Io(msg) => {
                f.write_str(msg)
            }
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

const EXIT_INVARIANT_VIOLATION: u8 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "optstop",
    version,
    about = "Type-I error inflation from optional extra observations",
    propagate_version = true
)]
struct Cli {
    /// Output format for the result table.
    #[arg(long, value_enum, global = true, default_value_t = table::Format::Csv)]
    format: table::Format,
    /// Write the table to this file (atomically) instead of stdout; the run
    /// manifest then goes to the sibling file `<PATH>.manifest.json`.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate the inflation constant h(alpha) for given levels.
    HTable(commands::HTableArgs),
    /// Predict the relative inflation rho for one configuration.
    Predict(commands::PredictArgs),
    /// Estimate the inflated level by Monte Carlo.
    Simulate(commands::SimulateArgs),
    /// Simulation versus predictors over an n x k grid.
    Compare(commands::CompareArgs),
    /// Check the prefix-maximum identity exactly on a preset walk.
    KacCheck(commands::KacCheckArgs),
    /// Tabulate expected positive parts of the score walk.
    Esl(commands::EslArgs),
    /// Check the pair-sum moment bound by simulation.
    VbeCheck(commands::VbeCheckArgs),
}

impl Command {
    fn manifest(&self) -> (&'static str, serde_json::Value, Option<u64>) {
        match self {
            Command::HTable(a) => a.manifest(),
            Command::Predict(a) => a.manifest(),
            Command::Simulate(a) => a.manifest(),
            Command::Compare(a) => a.manifest(),
            Command::KacCheck(a) => a.manifest(),
            Command::Esl(a) => a.manifest(),
            Command::VbeCheck(a) => a.manifest(),
        }
    }

    fn run(&self) -> Result<CommandOutput, CliError> {
        match self {
            Command::HTable(a) => a.run(),
            Command::Predict(a) => a.run(),
            Command::Simulate(a) => a.run(),
            Command::Compare(a) => a.run(),
            Command::KacCheck(a) => a.run(),
            Command::Esl(a) => a.run(),
            Command::VbeCheck(a) => a.run(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // Clap prints the message and picks the exit code: 2 for usage
        // errors, 0 for --help and --version.
        Err(e) => e.exit(),
    };

    let started = Instant::now();
    let (command, params, seed) = cli.command.manifest();
    let output = match cli.command.run() {
        Ok(output) => output,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };

    let rendered = output.table.render(cli.format);
    let run = RunManifest { command, params, seed, started };
    if let Err(e) = manifest::emit(&run, &rendered, cli.out.as_deref()) {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code());
    }

    if let Some(violation) = output.violation {
        eprintln!("invariant violation: {violation}");
        return ExitCode::from(EXIT_INVARIANT_VIOLATION);
    }
    ExitCode::SUCCESS
}
