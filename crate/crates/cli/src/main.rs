use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod failure;
mod output;

use config::{Format, RunFlags};
use failure::{Failure, EXIT_OK, EXIT_PARSE, EXIT_VERIFY};

/// Lie point symmetries, reductions and first integrals of difference systems.
#[derive(Debug, Parser)]
#[command(name = "dsym", version, about)]
struct Cli {
    #[command(flatten)]
    flags: RunFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and validate a system file
    Check { system: PathBuf },
    /// Iterate a system from four initial values
    Simulate {
        system: PathBuf,
        /// `x[n0],y[n0],x[n0+1],y[n0+1]`
        #[arg(allow_hyphen_values = true)]
        init: String,
        steps: usize,
        /// First index of the orbit
        #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
        start: i64,
    },
    /// Solve for point symmetries in an ansatz family
    Symmetries {
        system: PathBuf,
        /// Preset name or ansatz file
        ansatz: String,
    },
    /// Solve for first integrals with gradients in an ansatz family
    Integrals {
        system: PathBuf,
        /// Preset name or ansatz file
        ansatz: String,
    },
    /// Check a reduction file's invariants and reduced map along orbits
    Reduce { system: PathBuf, reduction: PathBuf },
    /// Check user-supplied characteristics or first integrals
    Verify { system: PathBuf, file: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Check { .. } => "check",
            Command::Simulate { .. } => "simulate",
            Command::Symmetries { .. } => "symmetries",
            Command::Integrals { .. } => "integrals",
            Command::Reduce { .. } => "reduce",
            Command::Verify { .. } => "verify",
        }
    }
}

fn run(cli: &Cli) -> Result<commands::Outcome, Failure> {
    cli.flags.validate().map_err(Failure::input)?;
    let f = &cli.flags;
    match &cli.command {
        Command::Check { system } => commands::cmd_check(system),
        Command::Simulate {
            system,
            init,
            steps,
            start,
        } => commands::cmd_simulate(system, init, *steps, *start),
        Command::Symmetries { system, ansatz } => commands::cmd_symmetries(f, system, ansatz),
        Command::Integrals { system, ansatz } => commands::cmd_integrals(f, system, ansatz),
        Command::Reduce { system, reduction } => commands::cmd_reduce(f, system, reduction),
        Command::Verify { system, file } => commands::cmd_verify(f, system, file),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let started = Instant::now();
    let outcome = run(&cli);
    eprintln!("{}: {:.3} s", cli.command.name(), started.elapsed().as_secs_f64());
    let code = match outcome {
        Ok(o) => {
            match cli.flags.format {
                Format::Json => {
                    let doc = output::envelope(cli.command.name(), cli.flags.echo(), o.result, o.passed);
                    println!("{}", serde_json::to_string_pretty(&doc).expect("report serializes"));
                }
                Format::Text => print!("{}", o.text),
            }
            if o.passed {
                EXIT_OK
            } else {
                EXIT_VERIFY
            }
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    };
    ExitCode::from(code as u8)
}
