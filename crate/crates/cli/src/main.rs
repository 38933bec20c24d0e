//! `sstkg`: synthesize or ingest a dataset, build the influence graph,
//! train embeddings, and serve forecasts, evaluations and counterfactuals.
//!
//! Exit codes: 0 success, 1 runtime failure (the offending stage is named),
//! 2 usage or validation error. All randomness is seeded, so reruns with the
//! same inputs and seed reproduce every output file byte for byte; only
//! timing lines vary.

mod commands;
mod config;
mod dataset;
mod reports;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ConfigFlags;
use dataset::DataArgs;
use sstkg_core::data::SlotRange;

#[derive(Debug, Parser)]
#[command(
    name = "sstkg",
    version,
    about = "Spatio-temporal influence-graph forecasting over located entities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset with known ground-truth influences.
    Synth(SynthArgs),
    /// Ingest a dataset and construct the influence graph.
    Build(BuildArgs),
    /// Train embeddings and influences on a built graph.
    Train(TrainArgs),
    /// Forecast records for chosen entities and slots.
    Predict(PredictArgs),
    /// Score forecasts on held-out slots and write metrics.json.
    Eval(EvalArgs),
    /// Attribute one forecast to its incoming influences.
    Explain(ExplainArgs),
    /// Re-forecast with chosen neighbors removed and test the shift.
    Mask(MaskArgs),
    /// Time every pipeline stage on a dataset.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// JSON file with the generator parameters.
    #[arg(long)]
    spec: PathBuf,
    /// Output directory for entities.csv, records.csv, ground_truth.json
    /// and synthetic.json.
    #[arg(long)]
    out: PathBuf,
    /// Distance threshold confining ground-truth influence pairs, in km.
    #[arg(long, default_value_t = 2.0)]
    threshold_km: f64,
}

#[derive(Debug, Args)]
struct BuildArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Output path of the graph artifact.
    #[arg(long)]
    out: PathBuf,
    /// Slots used for overall records and the regression, as `start..end`;
    /// defaults to the full grid.
    #[arg(long, value_parser = parse_slot_range)]
    train_slots: Option<SlotRange>,
    #[command(flatten)]
    config: ConfigFlags,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Graph artifact produced by `build`.
    #[arg(long)]
    graph: PathBuf,
    /// Output path of the model artifact.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigFlags,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Output CSV (`id,slot,predicted,method`).
    #[arg(long)]
    out: PathBuf,
    /// Single slot to forecast.
    #[arg(long, conflicts_with = "slots")]
    slot: Option<usize>,
    /// Slot range to forecast, as `start..end`.
    #[arg(long, value_parser = parse_slot_range)]
    slots: Option<SlotRange>,
    /// Comma-separated target ids; every entity when omitted.
    #[arg(long, value_delimiter = ',')]
    ids: Vec<String>,
    #[arg(long, value_enum, default_value = "embedding")]
    method: MethodArg,
    #[command(flatten)]
    config: ConfigFlags,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Output path of metrics.json.
    #[arg(long)]
    out: PathBuf,
    /// Held-out slots to score, as `start..end`.
    #[arg(long, value_parser = parse_slot_range)]
    test_slots: SlotRange,
    /// Expected training window; rejected if it differs from the graph's.
    #[arg(long, value_parser = parse_slot_range)]
    train_slots: Option<SlotRange>,
    /// Comma-separated target ids; every entity when omitted.
    #[arg(long, value_delimiter = ',')]
    ids: Vec<String>,
    #[arg(long, value_enum, default_value = "embedding")]
    method: MethodArg,
    #[command(flatten)]
    config: ConfigFlags,
}

#[derive(Debug, Args)]
struct ExplainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Target entity to attribute.
    #[arg(long)]
    id: String,
    /// Slot at which temporal relations are evaluated.
    #[arg(long)]
    slot: usize,
    /// Output path of the attribution report.
    #[arg(long)]
    out: PathBuf,
    /// Optional CSV of every edge (`source,distance_km,influence`).
    #[arg(long)]
    scatter: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigFlags,
}

#[derive(Debug, Args)]
struct MaskArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Target entity whose forecasts are re-run.
    #[arg(long)]
    id: String,
    /// Comma-separated neighbor ids to remove; empty mask re-reports the
    /// baseline.
    #[arg(long, value_delimiter = ',')]
    mask: Vec<String>,
    /// Slots to tabulate, as `start..end`.
    #[arg(long, value_parser = parse_slot_range)]
    slots: SlotRange,
    /// Output CSV (`day,real,R0,R_masked`).
    #[arg(long)]
    out: PathBuf,
    /// Optional path for the t-test report artifact.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "embedding")]
    method: MethodArg,
    /// Alternative hypothesis of the paired test on R0 vs R_masked; `auto`
    /// derives the direction from the sign of the removed contributions.
    #[arg(long, value_enum, default_value = "auto")]
    direction: DirectionArg,
    #[command(flatten)]
    config: ConfigFlags,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Training window, as `start..end`; defaults to the full grid.
    #[arg(long, value_parser = parse_slot_range)]
    train_slots: Option<SlotRange>,
    #[command(flatten)]
    config: ConfigFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum MethodArg {
    /// Decode neighbor values from trained record slices.
    Embedding,
    /// Read neighbor values from the raw series.
    Direct,
    /// The target's own last observation (baseline).
    Persistence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum DirectionArg {
    Auto,
    /// H1: R0 > R_masked.
    AGreater,
    /// H1: R0 < R_masked.
    ALess,
    TwoSided,
}

fn parse_slot_range(s: &str) -> Result<SlotRange, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("{s:?} is not a range; expected start..end"))?;
    let start: usize = a.trim().parse().map_err(|e| format!("bad range start {a:?}: {e}"))?;
    let end: usize = b.trim().parse().map_err(|e| format!("bad range end {b:?}: {e}"))?;
    SlotRange::new(start, end).map_err(|e| e.to_string())
}

/// Failure carrying its exit code: usage/validation problems exit 2,
/// pipeline failures exit 1 and name the stage that broke.
#[derive(Debug)]
enum CliError {
    Usage(String),
    Stage { stage: &'static str, source: anyhow::Error },
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Stage { .. } => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Stage { stage, source } => write!(f, "{stage}: {source:#}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

trait StageExt<T> {
    /// Tags a failure with the pipeline stage it belongs to (exit code 1).
    fn stage(self, stage: &'static str) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> StageExt<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> CliResult<T> {
        self.map_err(|e| CliError::Stage { stage, source: e.into() })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
