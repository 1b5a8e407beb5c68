use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use metamodel_core::{ErrorCategory, MetricKind, Task};

mod commands;
mod config;
mod report;

/// Environment variable holding the worker thread count.
const WORKERS_VAR: &str = "METAMODEL_WORKERS";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core {
        stage: String,
        source: metamodel_core::Error,
    },
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core { source, .. } => match source.category() {
                ErrorCategory::Usage => 1,
                ErrorCategory::Data => 2,
                ErrorCategory::Numeric => 3,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core { stage, source } => write!(f, "{stage} failed: {source}"),
        }
    }
}

/// Attaches a stage name to a library error.
pub trait Stage<T> {
    fn stage(self, stage: impl Into<String>) -> Result<T, CliError>;
}

impl<T> Stage<T> for metamodel_core::Result<T> {
    fn stage(self, stage: impl Into<String>) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core {
            stage: stage.into(),
            source,
        })
    }
}

#[derive(Parser, Debug)]
#[command(name = "metamodel", version, about = "Train and evaluate heterogeneous learner ensembles on tabular data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one ensemble per target and write model files plus a training report.
    Train(TrainArgs),
    /// Write ensemble predictions for every row of a dataset.
    Predict(PredictArgs),
    /// Predict, score against the dataset's targets and write an evaluation report.
    Evaluate(EvaluateArgs),
    /// Paired bootstrap comparison of two prediction files.
    Compare(CompareArgs),
    /// Aggregated feature importance of trained models.
    Importance(ImportanceArgs),
    /// Correlation-weighted effective sample size of each target.
    EffectiveN(EffectiveNArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Target column(s), comma separated or repeated.
    #[arg(long, required = true, value_delimiter = ',')]
    pub target: Vec<String>,
    #[arg(long)]
    pub task: Option<Task>,
    #[arg(long)]
    pub split_file: Option<PathBuf>,
    /// train,val,test fractions for a seeded random split.
    #[arg(long)]
    pub split_frac: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Model file(s) written by `train`.
    #[arg(long, required = true)]
    pub model: Vec<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long, required = true)]
    pub model: Vec<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    /// Restrict evaluation to the `test` rows of this split file.
    #[arg(long)]
    pub split_file: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Compare the ensemble against its best single slot with this many resamples.
    #[arg(long)]
    pub n_boot: Option<usize>,
    /// Metric for the bootstrap comparison (defaults to rmse / roc-auc).
    #[arg(long)]
    pub metric: Option<MetricKind>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Prediction file A; its target column supplies the truth.
    pub preds_a: PathBuf,
    pub preds_b: PathBuf,
    #[arg(long)]
    pub target: String,
    #[arg(long)]
    pub metric: MetricKind,
    #[arg(long, default_value_t = metamodel_core::significance::DEFAULT_N_BOOT)]
    pub n_boot: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ImportanceArgs {
    #[arg(long, required = true)]
    pub model: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EffectiveNArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, required = true, value_delimiter = ',')]
    pub target: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn configure_workers() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(WORKERS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::usage(format!("{WORKERS_VAR} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::usage(format!("cannot start {n} workers: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_workers()?;
    match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Compare(a) => commands::compare(&a),
        Command::Importance(a) => commands::importance(&a),
        Command::EffectiveN(a) => commands::effective_n(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
