use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mlsb::config::RunConfig;
use mlsb::run::{self, RunError};

#[derive(Parser)]
#[command(name = "mlsb", version, about = "Equilibrium coherences of the multi-level spin-boson model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Temperature sweep over the configured methods.
    Sweep(Args),
    /// Residuals of each method against the exact-diagonalization oracle.
    Compare(Args),
    /// Classical, semiclassical and quantum phase-space grids.
    Figure2(Args),
    /// Parse the configuration and report regime warnings.
    Validate(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    /// Output file (sweep, compare) or directory (figure2).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(path: &Path) -> Result<RunConfig, RunError> {
    let text = std::fs::read_to_string(path).map_err(RunError::Io)?;
    let cfg = text.parse::<RunConfig>()?;
    if cfg.omega_bar_defaulted {
        eprintln!("note: omega_bar not set, using {} cm^-1", mlsb::model::DEFAULT_OMEGA_BAR);
    }
    Ok(cfg)
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), RunError> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Sweep(a) => {
            let cfg = load(&a.config)?;
            let csv = run::run_sweep(&cfg)?;
            emit(&csv, a.out.as_deref().or(cfg.output.as_deref()))
        }
        Command::Compare(a) => {
            let cfg = load(&a.config)?;
            let csv = run::run_compare(&cfg)?;
            emit(&csv, a.out.as_deref().or(cfg.output.as_deref()))
        }
        Command::Figure2(a) => {
            let cfg = load(&a.config)?;
            let dir = a.out.or(cfg.output.clone()).unwrap_or_else(|| PathBuf::from("."));
            let (paths, report) = run::run_figure2(&cfg, &dir)?;
            for p in paths {
                eprintln!("wrote {}", p.display());
            }
            eprint!("{report}");
            Ok(())
        }
        Command::Validate(a) => {
            let cfg = load(&a.config)?;
            print!("{}", run::validate(&cfg)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mlsb: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
