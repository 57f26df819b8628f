use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use subot_core::pipeline::Method;

#[derive(Debug, Parser)]
#[command(name = "subot", version, about = "Substructure-level optimal transport for domain adaptation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic source/target pair.
    Synth(SynthArgs),
    /// Turn a raw accelerometer (and gyroscope) recording into window features.
    Features(FeaturesArgs),
    /// Run one adaptation and write its result files.
    Adapt(AdaptArgs),
    /// Run every ordered dataset pair for several methods.
    Benchmark(BenchmarkArgs),
    /// Vary one hyper-parameter with the others fixed.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    #[value(name = "sot_c")]
    SotC,
    #[value(name = "sot_g")]
    SotG,
    Otda,
    Nn,
}

impl From<VariantArg> for Method {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::SotC => Method::SotC,
            VariantArg::SotG => Method::SotG,
            VariantArg::Otda => Method::Otda,
            VariantArg::Nn => Method::Nn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    Lambda1,
    Lambda,
    Eta,
    #[value(name = "k_t")]
    KT,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Lambda1 => "lambda1",
            SweepAxis::Lambda => "lambda",
            SweepAxis::Eta => "eta",
            SweepAxis::KT => "k_t",
        }
    }
}

/// Hyper-parameter overrides shared by the adaptation commands.
#[derive(Debug, Clone, Default, Args)]
pub struct TuningArgs {
    /// Number of target substructures (default 4 × classes).
    #[arg(long = "kt")]
    pub k_t: Option<usize>,
    /// Entropic weight of the source-weighting step.
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// Entropic weight of the coupling.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Group-lasso weight.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// EM restarts per candidate component count.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// JSON file with defaults; explicit flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed stored in `--toy` (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Rows per domain (proportions kept).
    #[arg(long)]
    pub size: Option<usize>,
    /// JSON toy layout replacing the built-in one.
    #[arg(long)]
    pub toy: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FeaturesArgs {
    /// CSV with a header and columns ax,ay,az[,gx,gy,gz][,label].
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Sampling rate in Hz.
    #[arg(long, default_value_t = 50.0)]
    pub rate: f64,
    #[arg(long, default_value_t = 128)]
    pub window: usize,
    #[arg(long, default_value_t = 0.5)]
    pub overlap: f64,
    /// Columns 4 to 6 hold a gyroscope.
    #[arg(long)]
    pub gyro: bool,
    /// The last column is an activity label; each window takes its majority.
    #[arg(long)]
    pub labels: bool,
}

#[derive(Debug, Clone, Args)]
pub struct AdaptArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    /// Labeled dataset CSVs; every ordered pair is one task.
    #[arg(long = "datasets", num_args = 2.., required = true)]
    pub datasets: Vec<PathBuf>,
    /// Methods to run (default: all four).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub methods: Vec<VariantArg>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    #[arg(long, value_enum)]
    pub axis: SweepAxis,
    /// Comma-separated values of the swept parameter.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub values: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub tuning: TuningArgs,
}
