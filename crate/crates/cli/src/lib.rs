//! Command-line front-end for `lpv-observer`.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lpv_observer::{Error, RadiusMode};
use thiserror::Error as ThisError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 2;
pub const EXIT_CONTAINMENT: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid certificate: {0}")]
    Certificate(String),
    #[error("{0}")]
    Io(String),
    /// A check or pipeline stage ran and reported failure.
    #[error("{0}")]
    Failed(String),
    #[error("{0}")]
    Containment(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Containment(_) | CliError::Core(Error::ContainmentViolation { .. }) => {
                EXIT_CONTAINMENT
            }
            _ => EXIT_FAILURE,
        }
    }

    /// Prefixes the message with `ctx` (typically a file name).
    pub fn context(self, ctx: &str) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("{ctx}: {m}")),
            CliError::Core(e) => CliError::Config(format!("{ctx}: {e}")),
            other => other,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lpvobs", version, about = "Set-valued state and unknown-input observers for polytopic LPV systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a model and test the necessary conditions for an observer.
    Check(CheckArgs),
    /// Solve the gain synthesis SDP and write a gains file.
    Synthesize(SynthesizeArgs),
    /// Simulate one scenario and write the estimation trace.
    Simulate(SimulateArgs),
    /// Run a Monte-Carlo containment campaign.
    Campaign(CampaignArgs),
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Output directory for check.toml.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Optimal,
    Convergent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RadiusModeArg {
    #[value(name = "worst_case")]
    WorstCase,
    #[value(name = "time_varying")]
    TimeVarying,
}

impl From<RadiusModeArg> for RadiusMode {
    fn from(m: RadiusModeArg) -> Self {
        match m {
            RadiusModeArg::WorstCase => RadiusMode::WorstCase,
            RadiusModeArg::TimeVarying => RadiusMode::TimeVarying,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value = "optimal")]
    pub mode: ModeArg,
    /// Gains file to write (default: <out>/gains.toml).
    #[arg(long)]
    pub gains: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Skip the necessary-condition precheck.
    #[arg(long)]
    pub force: bool,
    /// Relative LMI margin.
    #[arg(long)]
    pub margin: Option<f64>,
    /// Accept certificates with ill-conditioned S (with a warning).
    #[arg(long)]
    pub allow_ill_conditioned: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub gains: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "worst_case")]
    pub radius_mode: RadiusModeArg,
    /// Margin used when re-verifying the gains file (default: the stored one).
    #[arg(long)]
    pub margin: Option<f64>,
    /// Negative control: multiply theta by this factor before running.
    #[arg(long, value_name = "FACTOR")]
    pub corrupt_theta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct CampaignArgs {
    /// Scenario file; repeat to cycle trials over several scenarios.
    #[arg(long, required = true)]
    pub scenario: Vec<PathBuf>,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    #[command(flatten)]
    pub run: RunArgs,
}

/// Parses arguments and runs the command, returning the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{rendered}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{rendered}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Check(a) => commands::check(a, stdout),
        Command::Synthesize(a) => commands::synthesize(a, stdout),
        Command::Simulate(a) => commands::simulate(a, stdout),
        Command::Campaign(a) => commands::campaign(a, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
