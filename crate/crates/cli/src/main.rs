//! `rampkit`: the ramp pipeline as file-based stages.
//!
//! Each subcommand reads the previous stage's files from `--out` and writes its
//! own there. Exit status is 0 on success, 2 for usage, config or data errors
//! and 1 for anything else.

mod commands;
mod config;
mod files;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rampkit_core::matching::Stride;
use rampkit_core::ramp::Definition;

use crate::config::Model;

/// Bad input from the user: flags, config, data files or a missing stage.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "rampkit", version, about = "Wind ramp identification and forecasting pipeline")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Directory for every stage's inputs and outputs.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for parallel stages.
    #[arg(long, global = true, env = "RAMPKIT_THREADS", value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic scenario, its ramp annotations and a history.
    Synth(SynthArgs),
    /// VMD-IC: decompose wind speed, screen modes, select poles.
    Decompose(DecomposeArgs),
    /// Segment the denoised speed at its poles and label ramps.
    Ramps(RampArgs),
    /// Match every segment against the historical series.
    Match(MatchArgs),
    /// Assemble features and forecast power.
    Forecast(ForecastArgs),
    /// Score a forecast CSV.
    Evaluate(EvaluateArgs),
    /// Sparse-attention selection overlap and dot-product counts.
    AttentionBench(BenchArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long)]
    pub history_length: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct DenoiseArgs {
    /// Number of VMD modes.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Adaptive pole window coefficient.
    #[arg(long)]
    pub ell: Option<f64>,
    /// Pole-rate threshold for keeping a mode.
    #[arg(long)]
    pub tau_rate: Option<f64>,
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    /// Scenario CSV; defaults to `scenario.csv` in the output directory.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub denoise: DenoiseArgs,
    /// Keep every mode regardless of pole rate.
    #[arg(long)]
    pub keep_all: bool,
}

#[derive(Args, Debug)]
pub struct RampArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub definition: Option<Definition>,
    /// MW threshold for def1 and def2.
    #[arg(long)]
    pub p_val: Option<f64>,
    /// |rho| threshold; a training-window percentile when omitted.
    #[arg(long)]
    pub rho_threshold: Option<f64>,
    #[arg(long)]
    pub split: Option<f64>,
}

#[derive(Args, Debug)]
pub struct MatchArgs {
    /// Historical CSV; defaults to `history.csv` in the output directory.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long)]
    pub radius: Option<usize>,
    #[arg(long, value_parser = parse_stride)]
    pub stride: Option<Stride>,
    #[command(flatten)]
    pub denoise: DenoiseArgs,
}

#[derive(Args, Debug)]
pub struct ForecastArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Comma-separated power lags.
    #[arg(long, value_delimiter = ',')]
    pub lags: Option<Vec<usize>>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub split: Option<f64>,
    #[arg(long)]
    pub capacity: Option<f64>,
    #[arg(long)]
    pub nwp_k: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Forecast CSV with `actual` and `predicted`; defaults to `forecast.csv`.
    #[arg(long)]
    pub forecast: Option<PathBuf>,
    #[arg(long)]
    pub capacity: Option<f64>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Comma-separated sequence lengths.
    #[arg(long, value_delimiter = ',', default_value = "64,256,1024")]
    pub l: Vec<usize>,
    #[arg(long, default_value_t = 8)]
    pub d: usize,
    #[arg(long, default_value_t = 8)]
    pub s: usize,
    #[arg(long, default_value_t = 50)]
    pub seeds: usize,
    #[arg(long, default_value_t = rampkit_core::attention::DEFAULT_SAMPLE_FACTOR)]
    pub factor: f64,
}

fn parse_stride(s: &str) -> Result<Stride, String> {
    match s {
        "quarter" => Ok(Stride::Quarter),
        "exact" => Ok(Stride::Exact),
        _ => Err(format!("expected `quarter` or `exact`, got `{s}`")),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() || cause.is::<serde_json::Error>() || cause.is::<csv::Error>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<rampkit_core::Error>() {
            return if matches!(e, rampkit_core::Error::Io(_)) { 1 } else { 2 };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n as usize).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
