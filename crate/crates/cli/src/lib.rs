//! Command-line front end for the `molcom-core` link model.
//!
//! `molcom sweep` writes CSV series over the molecule budget, `molcom
//! optimize` runs the tradeoff descent and `molcom validate` checks the
//! analytical model against finite differences, Monte Carlo and Brownian
//! walkers.

pub mod config;
pub mod csv;
pub mod error;
pub mod optimize;
pub mod sweep;
pub mod validate;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;
pub use error::CliError;
pub use sweep::SweepKind;
pub use validate::ValidateKind;

use csv::Table;

#[derive(Debug, Parser)]
#[command(
    name = "molcom",
    version,
    about = "Diffusion-based molecular communication link model"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output CSV; defaults to the config `output` key, then stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a series over the molecule grid.
    Sweep {
        #[arg(long, value_enum)]
        kind: SweepKind,
        #[command(flatten)]
        common: Common,
    },
    /// Minimize the balance function by gradient descent; writes the trace.
    Optimize {
        #[command(flatten)]
        common: Common,
    },
    /// Check the model against an independent reference.
    Validate {
        #[arg(long, value_enum)]
        kind: ValidateKind,
        #[command(flatten)]
        common: Common,
    },
}

impl Common {
    fn load(&self) -> Result<(RunConfig, Option<PathBuf>), CliError> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg = cfg.with_seed(seed);
        }
        let out = self.out.clone().or_else(|| cfg.output.clone());
        Ok((cfg, out))
    }
}

fn emit(table: &Table, out: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(path) => table.write_atomic(path)?,
        None => stdout.write_all(table.render().as_bytes())?,
    }
    Ok(())
}

/// Executes one parsed command. Reports go to `stdout`.
pub fn execute(command: &Command, stdout: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Sweep { kind, common } => {
            let (cfg, out) = common.load()?;
            let table = sweep::run_sweep(*kind, &cfg)?;
            emit(&table, out.as_deref(), stdout)
        }
        Command::Optimize { common } => {
            let (cfg, out) = common.load()?;
            let report = optimize::run_optimize(&cfg)?;
            write!(stdout, "{report}")?;
            if let Some(path) = out.as_deref() {
                report.trace_table().write_atomic(path)?;
            }
            if report.result.converged {
                Ok(())
            } else {
                Err(CliError::NotConverged(report.result.iterations))
            }
        }
        Command::Validate { kind, common } => {
            let (cfg, out) = common.load()?;
            let v = validate::run_validate(*kind, &cfg)?;
            writeln!(stdout, "{}", v.summary)?;
            if let Some(path) = out.as_deref() {
                v.table.write_atomic(path)?;
            }
            if v.passed {
                writeln!(stdout, "PASS")?;
                Ok(())
            } else {
                writeln!(stdout, "FAIL")?;
                Err(CliError::ValidationFailed(v.summary))
            }
        }
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                return error::EXIT_CONFIG;
            }
            let _ = write!(stdout, "{text}");
            return 0;
        }
    };
    match execute(&cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
