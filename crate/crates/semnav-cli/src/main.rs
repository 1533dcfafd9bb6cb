//! Multi-command pipeline: ingest → embed → (whiten) → metrics →
//! compare / correlate, all rooted in a per-configuration run directory.
//!
//! Exit codes: 0 success, 1 data/validation error, 2 usage/config error.

mod commands;
mod config;
mod manifest;
mod store;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Config;
use manifest::RunManifest;
use store::RunStore;

const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "semnav",
    version,
    about = "Embedding-space trajectory analytics for concept production data"
)]
struct Cli {
    /// Pipeline configuration JSON (defaults apply when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory override (default: <runs_root>/<config-hash>).
    #[arg(long, global = true)]
    run_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate datasets, store them canonically, report descriptive stats.
    Ingest(IngestArgs),
    /// Turn stored datasets into embedded trajectories.
    Embed(EmbedArgs),
    /// Compute the five trajectory metrics per trajectory.
    Metrics(MetricsArgs),
    /// Fit and apply ZCA whitening per (dataset, backend, mode) scope.
    Whiten(WhitenArgs),
    /// Welch pairwise group comparisons with Holm correction.
    Compare(CompareArgs),
    /// Cross-backend Pearson correlation matrices.
    Correlate(CorrelateArgs),
}

#[derive(Args)]
pub struct IngestArgs {
    /// Column-schema JSON for the positional files.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Dataset id for the positional files (default: file stem).
    #[arg(long)]
    dataset_id: Option<String>,
    /// Only ingest this configured dataset.
    #[arg(long)]
    dataset: Option<String>,
    /// Ad-hoc CSV exports to ingest in addition to configured datasets.
    files: Vec<PathBuf>,
}

#[derive(Args)]
pub struct EmbedArgs {
    /// Only embed this dataset.
    #[arg(long)]
    dataset: Option<String>,
    /// Backend id from the config, or `static:<path>` for an ad-hoc
    /// word-vector table.
    #[arg(long)]
    backend: Option<String>,
    /// cumulative or non-cumulative (default: config prefix_modes).
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Args)]
pub struct MetricsArgs {
    /// Time-scale factor for velocity and acceleration.
    #[arg(long)]
    alpha: Option<f64>,
    /// Also write long-format per-step values to metrics_steps.csv.
    #[arg(long)]
    per_step: bool,
    /// Also compute approximate entropy (m = 2, r = 0.2·SD).
    #[arg(long)]
    apen: bool,
    /// Divide binarized entropy by the number of valid steps.
    #[arg(long)]
    entropy_per_step: bool,
    /// Use non-cumulative embeddings for the centroid metric.
    #[arg(long)]
    centroid_standalone: bool,
}

#[derive(Args)]
pub struct WhitenArgs {
    /// Eigenvalue regularization (default from config, 1e-5).
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Args)]
pub struct CompareArgs {
    /// Only compare within this dataset.
    #[arg(long)]
    dataset: Option<String>,
}

#[derive(Args)]
pub struct CorrelateArgs {
    /// Backend ids to correlate (default: all with metric rows).
    #[arg(long, value_delimiter = ',')]
    backends: Vec<String>,
    /// Only correlate within this dataset.
    #[arg(long)]
    dataset: Option<String>,
}

/// Error carrying its process exit code: 1 for data/validation problems,
/// 2 for usage/configuration problems.
pub enum CliError {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 1,
        }
    }

    fn message(&self) -> &anyhow::Error {
        match self {
            CliError::Usage(e) | CliError::Data(e) => e,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Extension helpers to classify `anyhow` results.
pub trait Classify<T> {
    fn usage_err(self) -> CliResult<T>;
    fn data_err(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage_err(self) -> CliResult<T> {
        self.map_err(|e| CliError::Usage(e.into()))
    }
    fn data_err(self) -> CliResult<T> {
        self.map_err(|e| CliError::Data(e.into()))
    }
}

/// Everything a command needs about the active run.
pub struct Ctx {
    pub config: Config,
    pub config_hash: String,
    pub store: RunStore,
    pub manifest: RunManifest,
}

impl Ctx {
    fn build(cli: &Cli) -> CliResult<Self> {
        let config = match &cli.config {
            Some(path) => Config::load(path).usage_err()?,
            None => Config::default(),
        };
        let config_hash = config.hash();
        let run_dir = config.run_dir(cli.run_dir.as_deref());
        std::fs::create_dir_all(&run_dir).data_err()?;
        let manifest =
            RunManifest::load_or_create(&run_dir, &config_hash, TOOL_VERSION).data_err()?;
        Ok(Ctx {
            config,
            config_hash,
            store: RunStore::new(&run_dir),
            manifest,
        })
    }

    fn finish(mut self, command: &str) -> CliResult<()> {
        self.manifest.record_command(command);
        self.manifest.save(self.store.root()).data_err()?;
        Ok(())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .format_target(false)
        .init();

    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {:#}", err.message());
            ExitCode::from(err.code())
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let mut ctx = Ctx::build(cli)?;
    let name = match &cli.command {
        Command::Ingest(args) => {
            commands::ingest::run(&mut ctx, args)?;
            "ingest"
        }
        Command::Embed(args) => {
            commands::embed::run(&mut ctx, args)?;
            "embed"
        }
        Command::Metrics(args) => {
            commands::metrics::run(&mut ctx, args)?;
            "metrics"
        }
        Command::Whiten(args) => {
            commands::whiten::run(&mut ctx, args)?;
            "whiten"
        }
        Command::Compare(args) => {
            commands::compare::run(&mut ctx, args)?;
            "compare"
        }
        Command::Correlate(args) => {
            commands::correlate::run(&mut ctx, args)?;
            "correlate"
        }
    };
    ctx.finish(name)
}
