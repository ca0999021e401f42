//! Command-line pipeline: ingest, clean, discover, assign, eval, synth, report.

pub mod commands;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use powerstate_core::classify::ClassifyError;
use powerstate_core::cluster::ClusterError;
use powerstate_core::features::FeatureError;
use powerstate_core::impute::ImputeError;
use powerstate_core::ingest::IngestError;
use powerstate_core::reduce::PcaError;
use powerstate_core::synth::SynthError;
use powerstate_core::PhaseMode;

pub use config::{Overrides, PipelineConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("numerical: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Io { .. } => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

macro_rules! map_error {
    ($($ty:ty => $variant:ident),* $(,)?) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::$variant(e.to_string())
            }
        })*
    };
}

map_error!(
    IngestError => Data,
    ImputeError => Data,
    FeatureError => Data,
    ClusterError => Numerical,
    PcaError => Numerical,
    ClassifyError => Numerical,
);

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "powerstate", version, about = "Operating-state identification for MiDAS power data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: GlobalOpts,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse the location's files and report grid coverage.
    Ingest,
    /// Impute gaps and write the one-minute feature matrix.
    Clean,
    /// Sweep k, pick the number of states and save the state model.
    Discover,
    /// Write per-day state, PCA and active-power files.
    Assign,
    /// Train the forest and write the per-day F1 leaderboard.
    Eval,
    /// Generate a synthetic location from a preset or profile file.
    Synth {
        /// Preset name (india-1 .. usa-2) or path to a TOML profile.
        #[arg(long, default_value = "india-4")]
        profile: String,
        #[arg(long, default_value_t = 1)]
        days: usize,
        #[arg(long)]
        start_date: Option<NaiveDate>,
    },
    /// Summarize existing outputs for the location.
    Report,
}

#[derive(Debug, Args, Default)]
pub struct GlobalOpts {
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub location: Option<String>,
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub timestamp_format: Option<String>,
    #[arg(long, global = true, value_parser = parse_phase_mode)]
    pub phase_mode: Option<PhaseMode>,
    #[arg(long, global = true)]
    pub standardize: bool,
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub k_min: Option<usize>,
    #[arg(long, global = true)]
    pub k_max: Option<usize>,
    #[arg(long, global = true)]
    pub train_start: Option<NaiveDate>,
    #[arg(long, global = true)]
    pub train_end: Option<NaiveDate>,
    #[arg(long, global = true)]
    pub forest_train_start: Option<NaiveDate>,
    #[arg(long, global = true)]
    pub forest_train_end: Option<NaiveDate>,
    /// Comma-separated evaluation days.
    #[arg(long, global = true, value_delimiter = ',')]
    pub dates: Option<Vec<NaiveDate>>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

fn parse_phase_mode(s: &str) -> Result<PhaseMode, String> {
    match s {
        "mean" | "mean-of-phases" => Ok(PhaseMode::MeanOfPhases),
        "concat" | "concat-phases" => Ok(PhaseMode::ConcatPhases),
        other => Err(format!("unknown phase mode '{other}' (mean or concat)")),
    }
}

impl GlobalOpts {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<PipelineConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        Overrides {
            location: self.location.clone(),
            data_dir: self.data_dir.clone(),
            output_dir: self.out.clone(),
            timestamp_format: self.timestamp_format.clone(),
            phase_mode: self.phase_mode,
            standardize: self.standardize,
            k: self.k,
            k_min: self.k_min,
            k_max: self.k_max,
            train_start: self.train_start,
            train_end: self.train_end,
            forest_train_start: self.forest_train_start,
            forest_train_end: self.forest_train_end,
            dates: self.dates.clone(),
            seed: self.seed,
        }
        .apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs one command and returns what it printed.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let cfg = cli.opts.resolve()?;
    commands::echo_config(&cfg)?;
    match &cli.command {
        Command::Ingest => commands::ingest(&cfg).map(|r| commands::render_ingest(&r)),
        Command::Clean => commands::clean(&cfg).map(|s| s.to_string()),
        Command::Discover => commands::discover(&cfg).map(|d| d.to_string()),
        Command::Assign => commands::assign(&cfg).map(|days| {
            days.iter().map(|d| format!("{d}\n")).collect()
        }),
        Command::Eval => commands::eval(&cfg).map(|rows| commands::render_leaderboard(&rows)),
        Command::Synth {
            profile,
            days,
            start_date,
        } => commands::synth(&cfg, profile, *days, *start_date)
            .map(|dir| format!("wrote synthetic location to {}\n", dir.display())),
        Command::Report => commands::report(&cfg),
    }
}
