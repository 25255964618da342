use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hyena_core::pipeline::commands::{artifact_path, parse_date};
use hyena_core::pipeline::{cmd_evaluate, cmd_forecast, cmd_importance, cmd_synth, cmd_train, exit_code, PipelineConfig};
use hyena_core::series::DayRange;
use hyena_core::{Error, Result};

/// Hybrid short-term load forecasting: seasonal regression + LSTM residual model.
#[derive(Parser)]
#[command(name = "hyena", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration (TOML). Defaults to the built-in synthetic setup.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the pipeline seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "hyena-out")]
    out: PathBuf,
    /// Comma-separated model list, overriding the config.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit all configured models and persist them.
    Train(Common),
    /// Backtest trained models over the test range and write reports.
    Evaluate(Common),
    /// Day-ahead forecasts from one trained model.
    Forecast {
        #[command(flatten)]
        common: Common,
        /// Artifact to use (default: <out>/models/<first model>.artifact).
        #[arg(long)]
        artifact: Option<PathBuf>,
        /// First day to forecast (YYYY-MM-DD).
        #[arg(long)]
        start: String,
        /// Last day to forecast (defaults to --start).
        #[arg(long)]
        end: Option<String>,
    },
    /// Write the synthetic dataset as CSV files.
    Synth(Common),
    /// Rank stage-2 candidate features by extra-trees importance.
    Importance(Common),
}

fn resolve(c: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &c.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(m) = &c.models {
        cfg.models = m.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(c) => {
            let cfg = resolve(&c)?;
            let models = cmd_train(&cfg, &c.out)?;
            for m in &models {
                println!("trained {} -> {}", m.name, artifact_path(&c.out, &m.name).display());
            }
        }
        Command::Evaluate(c) => {
            let cfg = resolve(&c)?;
            let report = cmd_evaluate(&cfg, &c.out)?;
            println!("{:<16} {:>10} {:>12}", "model", "MAPE %", "RMSE MW");
            for m in &report.models {
                println!("{:<16} {:>10.4} {:>12.2}", m.model, m.mape, m.rmse);
            }
        }
        Command::Forecast {
            common,
            artifact,
            start,
            end,
        } => {
            let cfg = resolve(&common)?;
            let first = parse_date(&start)?;
            let last = match end {
                Some(e) => parse_date(&e)?,
                None => first,
            };
            let range = DayRange::new(first, last)?;
            let artifact = match artifact {
                Some(a) => a,
                None => {
                    let name = cfg.models.first().ok_or_else(|| Error::Config("no model".into()))?;
                    artifact_path(&common.out, name)
                }
            };
            let out_file = common.out.join("forecast.csv");
            let values = cmd_forecast(&cfg, &artifact, range, &out_file)?;
            println!("wrote {} forecasts to {}", values.len(), out_file.display());
        }
        Command::Synth(c) => {
            let cfg = resolve(&c)?;
            cmd_synth(&cfg, &c.out)?;
            println!("wrote synthetic dataset to {}", c.out.display());
        }
        Command::Importance(c) => {
            let cfg = resolve(&c)?;
            let sc = cmd_importance(&cfg, &c.out)?;
            for (name, v) in sc.importance.ranked() {
                let mark = if sc.selected.contains(&name) { "*" } else { " " };
                println!("{mark} {name:<24} {v:.6}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
