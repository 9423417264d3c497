use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

mod commands;
mod config;
mod dataset;
mod error;

use config::{ConfigLayer, RunConfig};
use error::{AppError, AppResult};

/// Builds a multi-modal, multi-label patch dataset from satellite tiles.
///
/// Settings come from built-in defaults, then `--config`, then flags.
/// Set REBEN_PIPELINE_LOG (e.g. `info`, `debug`) for log output.
#[derive(Debug, Parser)]
#[command(name = "reben-pipeline", version)]
struct Cli {
    /// TOML configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads [default: number of processors]
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(flatten)]
    layer: ConfigLayer,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Quality-gate tiles and cut them into patches (replaces <out-dir>/patches)
    Tile,
    /// Rasterize reference maps, apply the coverage rule, derive labels
    Label,
    /// Assign train/validation/test by position within the tile
    Split,
    /// Write retained patches to the key-value store
    Encode {
        /// Also write one <key>.safetensors file per patch
        #[arg(long)]
        baseline: bool,
    },
    /// Per-class, per-split label counts
    Stats,
    /// Random-read benchmark of the store against per-patch files
    Bench {
        /// Number of random loads
        #[arg(long, default_value_t = 1000)]
        loads: usize,
    },
}

fn run(cli: Cli) -> AppResult<()> {
    let file = cli.config.as_deref().map(ConfigLayer::from_path).transpose()?.unwrap_or_default();
    let config = RunConfig::resolve(ConfigLayer::default().overlay(file).overlay(cli.layer))?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    match cli.jobs {
        Some(0) => return Err(AppError::usage("--jobs must be at least 1")),
        Some(n) => pool = pool.num_threads(n),
        None => {}
    }
    let pool = pool.build().map_err(|e| AppError::io(e.to_string()))?;

    let manifest = pool.install(|| match cli.command {
        Command::Tile => commands::tile::run(&config),
        Command::Label => commands::label::run(&config),
        Command::Split => commands::split::run(&config),
        Command::Encode { baseline } => commands::encode::run(&config, baseline),
        Command::Stats => commands::stats::run(&config),
        Command::Bench { loads } => commands::bench::run(&config, loads),
    })?;
    let path = manifest.write(config.out_dir()?)?;
    println!("{}", serde_json::to_string(&manifest.counts)?);
    log::info!("manifest written to {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("REBEN_PIPELINE_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
