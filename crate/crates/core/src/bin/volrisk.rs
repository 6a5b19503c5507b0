use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use volrisk::config::RunConfig;
use volrisk::pipeline::{Pipeline, Stage};

/// Realized-volatility forecasting and VaR backtesting pipeline.
#[derive(Debug, Parser)]
#[command(name = "volrisk", version)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "volrisk.toml")]
    config: PathBuf,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic intraday bars into `data_path`.
    Synth,
    /// Build the daily return and realized-variance panel.
    Ingest,
    /// Descriptive statistics of the constructed series.
    Stats,
    /// Fit volatility models and tail distributions on in-sample data.
    Fit,
    /// Rolling out-of-sample variance forecasts.
    Forecast,
    /// VaR series for every model and quantile method.
    Var,
    /// Coverage tests and forecast accuracy.
    Backtest,
    /// CSV reports and a plain-text summary.
    Report,
    /// Every stage in order (synth only when configured).
    All,
}

impl Command {
    fn stage(&self) -> Stage {
        match self {
            Command::Synth => Stage::Synth,
            Command::Ingest => Stage::Ingest,
            Command::Stats => Stage::Stats,
            Command::Fit => Stage::Fit,
            Command::Forecast => Stage::Forecast,
            Command::Var => Stage::Var,
            Command::Backtest => Stage::Backtest,
            Command::Report => Stage::Report,
            Command::All => Stage::All,
        }
    }
}

fn run(cli: &Cli) -> volrisk::Result<()> {
    let mut config = RunConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.output {
        config.output_dir = out.clone();
    }
    let stage = cli.command.stage();
    let pipeline = Pipeline::new(config)?;
    log::info!("running stage {stage}");
    pipeline.run(stage)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
