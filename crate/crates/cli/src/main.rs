//! `ct`: customized training from the command line.
//!
//! Exit codes: 0 on success, 2 for usage and input errors, 1 for anything else.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "ct", version, about = "Customized training for transductive prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cross-validate (G, lambda fraction) and fit the final model for the test rows.
    CvFit(CvFitArgs),
    /// Predict the test rows a model was fitted for.
    Predict(PredictArgs),
    /// Run the synthetic simulation study.
    Simulate(SimulateArgs),
    /// Fit a comparison method.
    #[command(subcommand)]
    Baseline(Baseline),
}

#[derive(Debug, Subcommand)]
enum Baseline {
    /// One lasso fit on all training rows.
    St(StArgs),
    /// k-nearest neighbours.
    Knn(KnnArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum FamilyArg {
    Gaussian,
    Binomial,
    Multinomial,
}

/// Data and execution flags shared by the fitting commands.
#[derive(Debug, Args, Serialize)]
struct DataArgs {
    /// Training CSV with a header row.
    #[arg(long)]
    train: PathBuf,
    /// Test CSV; must contain the training feature columns.
    #[arg(long)]
    test: PathBuf,
    /// Name of the response column.
    #[arg(long)]
    response: String,
    /// Column holding group labels (grouped mode).
    #[arg(long)]
    group: Option<String>,
    /// Model family; inferred from the response when omitted.
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    /// Misclassification costs per true class, e.g. `cancer=2,normal=1`.
    #[arg(long, value_delimiter = ',')]
    loss_weights: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct PathArgs {
    /// Penalty values per path.
    #[arg(long, default_value_t = 100)]
    lambda_count: usize,
    /// Smallest penalty as a fraction of the largest (default 0.01 if n > p, else 0.05).
    #[arg(long)]
    lambda_min_ratio: Option<f64>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Keep class proportions within each fold.
    #[arg(long)]
    stratify: bool,
}

#[derive(Debug, Args, Serialize)]
struct CvFitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    path: PathArgs,
    /// Candidate cluster counts.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,5,10")]
    g_grid: Vec<usize>,
    /// Nearest training rows per test row in grouped mode.
    #[arg(long, default_value_t = 10)]
    r_neighbors: usize,
    /// Standardize features before clustering.
    #[arg(long)]
    standardize_distances: bool,
    /// Skip cross-validation: fit with the single --g-grid value (joint mode)
    /// at --lambda-index.
    #[arg(long)]
    no_cv: bool,
    /// Path position used with --no-cv; 0 is the largest penalty.
    #[arg(long, default_value_t = 0)]
    lambda_index: usize,
}

#[derive(Debug, Args, Serialize)]
struct PredictArgs {
    /// Model written by `ct cv-fit`.
    #[arg(long)]
    model: PathBuf,
    /// The test CSV the model was fitted for.
    #[arg(long)]
    test: PathBuf,
    /// Training CSV; needed with --resolve-rejections.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Re-cut the dendrogram above rejected clusters and predict them too.
    #[arg(long)]
    resolve_rejections: bool,
    /// Training rows a resolved cluster must contain.
    #[arg(long, default_value_t = 1)]
    min_train: usize,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    /// `low-dim` (n = m = 300, p = 100) or `high-dim` (n = m = 200, p = 300).
    #[arg(long, default_value = "low-dim")]
    setting: String,
    #[arg(long, value_delimiter = ',', default_value = "0,5,10")]
    sigma_c: Vec<f64>,
    /// Number of replicates; replicate `i` uses seed `seed + i`.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Methods to run: ct, st, knn.
    #[arg(long, value_delimiter = ',', default_value = "ct,st,knn")]
    methods: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,5,10")]
    g_grid: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    lambda_count: usize,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct StArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    path: PathArgs,
}

#[derive(Debug, Args, Serialize)]
struct KnnArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Candidate neighbour counts, chosen by cross-validation.
    #[arg(long, value_delimiter = ',', default_value = "1,3,5,10,20,50")]
    k_grid: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::CvFit(a) => commands::cv_fit(a),
        Command::Predict(a) => commands::predict(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Baseline(Baseline::St(a)) => commands::baseline_st(a),
        Command::Baseline(Baseline::Knn(a)) => commands::baseline_knn(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
