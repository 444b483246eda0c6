//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use kappa4_core::{OptimizerConfig, StartStrategy};

use crate::commands::{self, Format};
use crate::error::{EXIT_INPUT, EXIT_OK};

#[derive(Debug, Parser)]
#[command(name = "kappa4", version, about = "Fit and study the four-parameter kappa distribution")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one or more estimators to a one-column CSV and report goodness of fit.
    Fit(FitCmd),
    /// Draw a random sample.
    Sample(SampleCmd),
    /// Run a Monte Carlo campaign described by a key = value config file.
    Simulate(SimulateCmd),
    /// Estimate a T-year return level with optional confidence intervals.
    ReturnLevel(ReturnLevelCmd),
    /// Write density, Q-Q and histogram data for plotting a fit.
    Plotdata(PlotCmd),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Start {
    Lme,
    Moment,
    Grid,
}

#[derive(Debug, Args)]
pub struct OptimizerFlags {
    /// Relative tolerance on the objective.
    #[arg(long, default_value_t = OptimizerConfig::default().rel_tolerance)]
    pub rel_tolerance: f64,
    /// Iteration budget per optimizer run.
    #[arg(long, default_value_t = OptimizerConfig::default().max_iterations)]
    pub max_iterations: usize,
    /// Nelder-Mead restarts.
    #[arg(long, default_value_t = OptimizerConfig::default().restarts)]
    pub restarts: usize,
    /// Start point strategy.
    #[arg(long, value_enum, default_value_t = Start::Lme)]
    pub start: Start,
}

impl OptimizerFlags {
    fn config(&self) -> OptimizerConfig {
        OptimizerConfig {
            rel_tolerance: self.rel_tolerance,
            max_iterations: self.max_iterations,
            restarts: self.restarts,
            start_strategy: match self.start {
                Start::Lme => StartStrategy::LmeStart,
                Start::Moment => StartStrategy::MomentStart,
                Start::Grid => StartStrategy::GridStart,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct OutputFlags {
    /// Emit JSON.
    #[arg(long, conflicts_with = "csv")]
    pub json: bool,
    /// Emit CSV.
    #[arg(long)]
    pub csv: bool,
    /// Write to this file instead of standard output.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

impl OutputFlags {
    fn format(&self) -> Format {
        if self.json {
            Format::Json
        } else if self.csv {
            Format::Csv
        } else {
            Format::Text
        }
    }
}

#[derive(Debug, Args)]
pub struct FitCmd {
    /// One-column CSV of observations.
    pub data: PathBuf,
    /// `mle`, `lme`, a combination name such as `MPLE.MSo(k)MSo(h)`, a comma-separated list, or `all`.
    #[arg(long, default_value = "all")]
    pub method: String,
    /// Seed for the bootstrap.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Parametric-bootstrap p-values with B replicates (999 when B is omitted).
    #[arg(long, value_name = "B", num_args = 0..=1, default_missing_value = "999")]
    pub bootstrap: Option<usize>,
    #[command(flatten)]
    pub out: OutputFlags,
    #[command(flatten)]
    pub optimizer: OptimizerFlags,
}

#[derive(Debug, Args)]
pub struct SampleCmd {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub mu: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub sigma: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub k: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub h: f64,
    /// Sample size.
    #[arg(short)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Write to this file instead of standard output.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateCmd {
    /// Campaign configuration file.
    pub config: PathBuf,
    /// Directory for results.csv, tables.txt and manifest.json.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReturnLevelCmd {
    /// One-column CSV of observations.
    pub data: PathBuf,
    /// Return period in years.
    #[arg(short = 'T', long = "years")]
    pub years: f64,
    #[arg(long, default_value = "mle")]
    pub method: String,
    /// Profile-likelihood interval at this level (0.95 when omitted).
    #[arg(long, value_name = "LEVEL", num_args = 0..=1, default_missing_value = "0.95")]
    pub profile_ci: Option<f64>,
    /// Parametric-bootstrap percentile interval with B replicates (999 when omitted).
    #[arg(long, value_name = "B", num_args = 0..=1, default_missing_value = "999")]
    pub bootstrap: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Write the profile deviance curve to this CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutputFlags,
    #[command(flatten)]
    pub optimizer: OptimizerFlags,
}

#[derive(Debug, Args)]
pub struct PlotCmd {
    /// One-column CSV of observations.
    pub data: PathBuf,
    #[arg(long, default_value = "mle")]
    pub method: String,
    /// Output directory.
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub optimizer: OptimizerFlags,
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> commands::Outcome {
    match cmd {
        Command::Fit(c) => {
            let args = commands::FitArgs {
                methods: commands::parse_method_arg(&c.method)?,
                data: c.data,
                seed: c.seed,
                bootstrap: c.bootstrap,
                format: c.out.format(),
                output: c.out.output,
                optimizer: c.optimizer.config(),
            };
            commands::fit(&args, out)
        }
        Command::Sample(c) => commands::sample(
            &commands::SampleArgs {
                params: [c.mu, c.sigma, c.k, c.h],
                n: c.n,
                seed: c.seed,
                output: c.output,
            },
            out,
        ),
        Command::Simulate(c) => commands::simulate(
            &commands::SimulateArgs {
                config: c.config,
                output: c.output,
            },
            out,
        ),
        Command::ReturnLevel(c) => commands::return_level(
            &commands::ReturnLevelArgs {
                format: c.out.format(),
                data: c.data,
                years: c.years,
                method: c.method,
                profile_ci: c.profile_ci,
                bootstrap: c.bootstrap,
                seed: c.seed,
                trace: c.trace,
                output: c.out.output,
                optimizer: c.optimizer.config(),
            },
            out,
        ),
        Command::Plotdata(c) => commands::plotdata(
            &commands::PlotArgs {
                data: c.data,
                method: c.method,
                output: c.output,
                seed: c.seed,
                optimizer: c.optimizer.config(),
            },
            out,
        ),
    }
}

/// Parse `argv` and run; returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(argv) {
        Ok(cli) => commands::finish(dispatch(cli.command, out), err),
        Err(e) => match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                let _ = write!(out, "{}", e.render());
                EXIT_OK
            }
            _ => {
                let _ = write!(err, "{}", e.render());
                EXIT_INPUT
            }
        },
    }
}
