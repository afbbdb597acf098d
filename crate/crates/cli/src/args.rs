use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const SEED_ENV: &str = "RELUWRAP_SEED";

#[derive(Debug, Parser)]
#[command(name = "reluwrap", version, about = "Unwrap, diagnose and simplify ReLU networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset CSV.
    Generate(GenerateArgs),
    /// Train a ReLU network on a grouped train/validation/test split.
    Train(TrainArgs),
    /// Partition data into activation regions with their local linear models.
    Unwrap(UnwrapArgs),
    /// Coefficient matrix, feature importance and profiles of a region set.
    Diagnose(DiagnoseArgs),
    /// Merge regions into K refitted logistic models.
    Merge(MergeArgs),
    /// Turn a merged model into a single-hidden-layer network.
    Flatten(FlattenArgs),
    /// Train once per l1 penalty and report AUC and region counts.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Generator {
    Cocircles,
    BalancedDefault,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::Test => "test",
        }
    }
}

#[derive(Debug, Args)]
pub struct OutDir {
    /// Directory for outputs and the run manifest.
    #[arg(long, short = 'o', default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SeedArg {
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(value_enum)]
    pub kind: Generator,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Number of features (balanced-default only).
    #[arg(long, default_value_t = 6)]
    pub d: usize,
    /// Gaussian noise standard deviation (cocircles only).
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Inner radius (cocircles only).
    #[arg(long, default_value_t = 0.5)]
    pub factor: f64,
    #[arg(long, default_value = "data.csv")]
    pub file_name: String,
    #[command(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct NetArgs {
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "5,5")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 0.005)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 300)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 20)]
    pub patience: usize,
    /// Train/validation/test fractions, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.6,0.2,0.2")]
    pub fractions: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub data: PathBuf,
    #[command(flatten)]
    pub net: NetArgs,
    /// l1 penalty on all weight matrices.
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[command(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct RowsArgs {
    /// Split indices written by `train`; restricts rows to `--split`.
    #[arg(long)]
    pub splits: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "train", requires = "splits")]
    pub split: SplitName,
}

#[derive(Debug, Args)]
pub struct UnwrapArgs {
    pub model: PathBuf,
    pub data: PathBuf,
    #[command(flatten)]
    pub rows: RowsArgs,
    /// Keep only the k largest regions in region_table.csv.
    #[arg(long)]
    pub top: Option<usize>,
    /// Leave per-region sample indices out of regions.json.
    #[arg(long)]
    pub omit_indices: bool,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    pub regions: PathBuf,
    pub data: PathBuf,
    /// Network document; needed only when regions.json has no sample indices.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub splits: Option<PathBuf>,
    /// Feature importance ranking.
    #[arg(long)]
    pub importance: bool,
    /// Coefficient matrix for a parallel-coordinate plot.
    #[arg(long)]
    pub pcplot: bool,
    /// Profile segments of one feature, by name or column index. Repeatable.
    #[arg(long)]
    pub profile: Vec<String>,
    /// Also write SVG figures.
    #[arg(long)]
    pub svg: bool,
    /// Scale coefficients by feature standard deviation in the PC matrix.
    #[arg(long)]
    pub standardize: bool,
    /// Bars shown in the importance figure.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    pub model: PathBuf,
    pub regions: PathBuf,
    pub data: PathBuf,
    #[arg(long)]
    pub splits: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Inverse l2 strength of the cluster refits.
    #[arg(long, default_value_t = 0.1)]
    pub c: f64,
    /// Also report silhouette scores for K = 2..=10.
    #[arg(long)]
    pub scan: bool,
    #[command(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct FlattenArgs {
    pub merged: PathBuf,
    pub data: PathBuf,
    /// Source network; required to score the ReLU and merged models.
    #[arg(long)]
    pub model: PathBuf,
    /// With splits the output layer is fit on train rows and the comparison
    /// reports train and test AUC.
    #[arg(long)]
    pub splits: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    pub c: f64,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub data: PathBuf,
    /// At least two l1 penalties, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub lambdas: Vec<f64>,
    #[command(flatten)]
    pub net: NetArgs,
    #[command(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    pub out: OutDir,
}
