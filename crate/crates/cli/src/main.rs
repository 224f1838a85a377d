mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hexapod_core::io::AngleUnit;

use commands::CliError;

#[derive(Parser)]
#[command(name = "hexapod", version, about = "Hexapod pose measurement with thermal-deflection decoupling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a heated measurement campaign; writes session, ground truth and report.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        scenario: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Angle unit of written files (default from the config).
        #[arg(long)]
        angle_unit: Option<AngleUnit>,
    },
    /// Conventional and decoupled pose estimates for every target of a session.
    Correct {
        #[arg(long)]
        config: PathBuf,
        session: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        angle_unit: Option<AngleUnit>,
    },
    /// Least-squares sphere per ball of a probe-point CSV, printed to stdout.
    Fit {
        points: PathBuf,
        /// Nominal ball radius (mm).
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Long-format CSV table from a report file.
    Report {
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            config,
            scenario,
            out,
            seed,
            angle_unit,
        } => commands::simulate(&config, &scenario, &out, seed, angle_unit),
        Command::Correct {
            config,
            session,
            out,
            angle_unit,
        } => commands::correct(&config, &session, &out, angle_unit),
        Command::Fit { points, radius } => {
            print!("{}", commands::fit(&points, radius)?);
            Ok(())
        }
        Command::Report { report, out } => commands::report(&report, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
