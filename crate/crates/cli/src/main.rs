use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use vidssm_cli::commands::{
    cmd_backbone, cmd_fit, cmd_predict, cmd_render_synthetic, cmd_track, BackboneArgs, Context, Fixture, RenderArgs,
    Scenario,
};
use vidssm_cli::config::LoadedConfig;
use vidssm_cli::CliError;

#[derive(Debug, Parser)]
#[command(name = "vidssm", version, about = "Track a feature in a video and learn a reduced-order model of its motion")]
struct Cli {
    /// Pipeline configuration (flat TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Log filter, e.g. `info` or `vidssm_core=debug`.
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Track the template through the configured video into track.csv.
    Track,
    /// Fit manifold, reduced dynamics and normal form into model.json.
    Fit {
        /// Training CSVs (overrides `train` in the config).
        #[arg(long, num_args = 1..)]
        train: Vec<PathBuf>,
    },
    /// Predict a test trajectory and report its CNMTE.
    Predict {
        /// Model document (default: <out>/model.json).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Test CSV (overrides `test` in the config).
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Tabulate backbone and damping curves into backbone.csv.
    Backbone {
        #[arg(long, conflicts_with = "fixture")]
        model: Option<PathBuf>,
        /// Use a built-in coefficient set instead of a fitted model.
        #[arg(long, value_enum)]
        fixture: Option<Fixture>,
        #[arg(long)]
        rho_max: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        /// Index of the embedded observable used for the amplitude column.
        #[arg(long)]
        observable: Option<usize>,
    },
    /// Render a synthetic marker video with its ground-truth track.
    RenderSynthetic {
        #[arg(long, value_enum)]
        scenario: Scenario,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        fps: Option<f64>,
    },
}

fn print<T: Serialize>(summary: T) -> Result<(), CliError> {
    let text = serde_json::to_string(&summary).map_err(|e| CliError::file(vidssm_cli::Stage::Output, "<stdout>", e))?;
    println!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(p) => LoadedConfig::load(p)?,
        None => LoadedConfig::defaults(),
    };
    let ctx = Context::new(config, cli.out)?;
    match cli.command {
        Command::Track => print(cmd_track(&ctx)?),
        Command::Fit { train } => print(cmd_fit(&ctx, &train)?),
        Command::Predict { model, test } => print(cmd_predict(&ctx, model.as_deref(), test.as_deref())?),
        Command::Backbone { model, fixture, rho_max, samples, observable } => {
            print(cmd_backbone(&ctx, &BackboneArgs { model, fixture, rho_max, samples, observable })?)
        }
        Command::RenderSynthetic { scenario, frames, fps } => {
            print(cmd_render_synthetic(&ctx, scenario, &RenderArgs { frames, fps })?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log_level).format_timestamp(None).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::to_string(&e.report()).unwrap_or_else(|_| format!("{{\"message\":\"{e}\"}}"));
            eprintln!("{report}");
            ExitCode::FAILURE
        }
    }
}
