use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use thermobeam::io::{exit_code, run, Command, RunConfig, RunOptions};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Simulate,
    Spectrum,
    Resolvent,
    Decay,
    Report,
    Convergence,
    ExportMatrices,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Simulate => Command::Simulate,
            Cmd::Spectrum => Command::Spectrum,
            Cmd::Resolvent => Command::Resolvent,
            Cmd::Decay => Command::Decay,
            Cmd::Report => Command::Report,
            Cmd::Convergence => Command::Convergence,
            Cmd::ExportMatrices => Command::ExportMatrices,
        }
    }
}

/// Thermoelastic/elastic Rayleigh beam transmission problem: simulation and
/// spectral checks.
#[derive(Debug, Parser)]
#[command(name = "thermobeam", version)]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,

    /// JSON run configuration (defaults are used when omitted).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory, overriding the config's `outputs`.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Maximum worker threads for the resolvent scan.
    #[arg(long)]
    threads: Option<usize>,

    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path),
        None => Ok(RunConfig::default()),
    };
    let mut cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };
    if let Some(out) = cli.out {
        cfg.outputs = out;
    }
    let opts = RunOptions { threads: cli.threads };
    match run(cli.command.into(), &cfg, &opts) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            if !cli.quiet {
                println!("{}", outcome.summary);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
