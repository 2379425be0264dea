//! `qgl`: penalized quantile forecasting on CSV time series.
//!
//! Exit codes: 0 success, 2 configuration, 3 data, 4 solver, 5 io.
//! Set `QGL_LOG=info` (or `debug`) for progress and timing output.

mod commands;
mod config;
mod csv_io;
mod error;

use clap::{Args, Parser, Subcommand};
use config::{Overrides, RunConfig};
use error::CliResult;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "qgl", version, about = "Penalized quantile forecasting for time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stationarity, normality and autocorrelation report for the target.
    Diagnose(RunArgs),
    /// Rank features by lasso-path entry order.
    Select(RunArgs),
    /// Grid-search hyperparameters by forward-chaining cross-validation.
    Cv(RunArgs),
    /// Expanding-window quantile forecasts over the test period.
    Forecast(RunArgs),
    /// Score a written forecast against the input data.
    Evaluate(RunArgs),
    /// diagnose, select, cv, forecast and evaluate in one run.
    Pipeline(RunArgs),
    /// Generate a seeded synthetic dataset and a matching config.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file, or the manifest of a previous run.
    #[arg(long)]
    config: PathBuf,
    /// Quantile levels, comma-separated (e.g. 0.25,0.5,0.75).
    #[arg(long, value_delimiter = ',')]
    tau: Option<Vec<f64>>,
    /// Penalty grid as log10 min,max,step (e.g. -5,1.01,0.2).
    #[arg(long, allow_hyphen_values = true)]
    lambda_grid: Option<String>,
    /// Methods to fit, comma-separated.
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<String>>,
    /// Last training date (YYYY-MM-DD or YYYY-MM).
    #[arg(long)]
    split_date: Option<String>,
    /// Missing-value policy: train_mean, test_mean or backward_fill.
    #[arg(long)]
    fill_policy: Option<String>,
    /// Where report files go.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Generator preset: benchmark (n=300, p=40) or selection (n=200, p=20).
    #[arg(long, default_value = "benchmark")]
    preset: String,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    output_dir: PathBuf,
}

impl RunArgs {
    fn resolve(&self) -> CliResult<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        let lambda_grid = self
            .lambda_grid
            .as_ref()
            .map(|s| parse_lambda_grid(s))
            .transpose()?;
        cfg.apply(&Overrides {
            taus: self.tau.clone(),
            lambda_grid,
            methods: self.method.clone(),
            split_date: self.split_date.clone(),
            fill_policy: self.fill_policy.clone(),
            output_dir: self.output_dir.clone(),
        });
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_lambda_grid(s: &str) -> CliResult<(f64, f64, f64)> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| {
            error::CliError::Config(format!("bad --lambda-grid `{s}`; expected min,max,step"))
        })?;
    if parts.len() != 3 {
        return Err(error::CliError::Config(format!(
            "bad --lambda-grid `{s}`; expected three comma-separated values"
        )));
    }
    Ok((parts[0], parts[1], parts[2]))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Diagnose(a) => commands::diagnose_cmd(&a.resolve()?),
        Command::Select(a) => commands::select_cmd(&a.resolve()?),
        Command::Cv(a) => commands::cv_cmd(&a.resolve()?),
        Command::Forecast(a) => commands::forecast_cmd(&a.resolve()?),
        Command::Evaluate(a) => commands::evaluate_cmd(&a.resolve()?),
        Command::Pipeline(a) => commands::pipeline_cmd(&a.resolve()?),
        Command::Synth(a) => commands::synth_cmd(&a.preset, a.seed, &a.output_dir),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("QGL_LOG")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
