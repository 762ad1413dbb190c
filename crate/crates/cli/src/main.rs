use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use panelcast_cli::{config, CliError, Command, Pipeline};

#[derive(Parser)]
#[command(name = "panelcast", version, about = "Rank indicators, tune, backtest and forecast a yearly country panel")]
struct Cli {
    /// Pipeline config file.
    #[arg(long, global = true, default_value = "panelcast.toml")]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Skip the SVG charts.
    #[arg(long, global = true)]
    no_svg: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Rank candidate indicators by EDR distance to the target and build panels.
    Rank,
    /// Grid search with cross-validation on the training years.
    Tune,
    /// Fit the backtest and full models with the tuned parameters.
    Train,
    /// Score the backtest model on train and test years.
    Evaluate,
    /// Predict the years after the panel end.
    Forecast,
    /// Summarize evaluation, forecasts and feature importance.
    Report,
    /// Run every stage in order.
    All,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Rank => Command::Rank,
            Cmd::Tune => Command::Tune,
            Cmd::Train => Command::Train,
            Cmd::Evaluate => Command::Evaluate,
            Cmd::Forecast => Command::Forecast,
            Cmd::Report => Command::Report,
            Cmd::All => Command::All,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let loaded = config::load(&cli.config)?;
    let pipeline = Pipeline::new(loaded, cli.seed, cli.out, cli.no_svg);
    pipeline.run(cli.command.into(), &mut std::io::stdout().lock())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("panelcast: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
