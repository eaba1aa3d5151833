//! `isochron`: run checks and experiments on a forced isochronous
//! oscillator described by a config file.
//!
//! Exit codes: 0 ok or condition holds, 1 configuration error, 2 numerical
//! failure, 3 map residuals not decreasing, 4 condition fails, 5 borderline.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::Command;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerics(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numerics(_) => 2,
        }
    }
}

impl From<isochron_core::Error> for CliError {
    fn from(e: isochron_core::Error) -> Self {
        match e {
            isochron_core::Error::InvalidInput(m) => CliError::Config(m),
            other => CliError::Numerics(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "isochron", version, about = "Boundedness checks and experiments for forced isochronous oscillators")]
struct Cli {
    /// Command to run; defaults to `run = ...` in the config.
    #[arg(value_enum)]
    command: Option<Command>,
    /// Config file with [system] and [command] sections.
    #[arg(long)]
    config: PathBuf,
    /// Directory for output files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Reserved. Every algorithm is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    /// Tolerance of the condition check, overriding the config.
    #[arg(long)]
    tol: Option<f64>,
}

fn run(cli: &Cli) -> Result<commands::Outcome, CliError> {
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| CliError::Config(format!("{}: {e}", cli.config.display())))?;
    let cfg = config::parse(&text)?;
    let cmd = match (cli.command, cfg.command) {
        (Some(a), Some(b)) if a != b => {
            return Err(CliError::Config(format!("command '{a}' given but the config is for '{b}'")))
        }
        (Some(c), _) | (None, Some(c)) => c,
        (None, None) => return Err(CliError::Config("no command given and the config has no 'run' key".into())),
    };
    let cx = commands::Context { system: &cfg.system, params: &cfg.params, out_dir: &cli.out, tol: cli.tol };
    commands::run(cmd, &cx)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(out) => {
            println!("{}", out.summary.trim_end());
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("isochron: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
