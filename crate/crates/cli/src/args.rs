use aqce_core::aqce::FidelityTier;
use aqce_core::dataset::{Augmentation, DataKind, DataType, ImageFormat};
use aqce_core::qasm::NumberStyle;
use aqce_core::qkernel::KernelMode;
use aqce_core::svm::{Strategy, DEFAULT_C_PENALTY, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Parser)]
#[command(
    name = "aqce",
    version,
    about = "Encode image data into quantum circuits and classify it with a fidelity kernel"
)]
pub struct Cli {
    /// Worker threads for record- and kernel-level parallelism [default: all cores]
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Only print warnings and errors to standard error
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode images into circuits and write a dataset directory
    Encode(EncodeArgs),
    /// Convert dense QASM (a file or a dataset) to u3/cx form
    ToBase(ToBaseArgs),
    /// Turn dense QASM (a file or a dataset) into token lines
    Tokenize(TokenizeArgs),
    /// Compute the kernel Gram matrix of a dataset
    Gram(GramArgs),
    /// Train a multiclass SVM on a dataset
    Train(TrainArgs),
    /// Classify a dataset with a trained model
    Predict(PredictArgs),
    /// Re-simulate a dataset and check every recorded value
    Validate(ValidateArgs),
}

fn parse_with<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

fn parse_tier(s: &str) -> Result<FidelityTier, String> {
    FidelityTier::from_tag(s).ok_or_else(|| format!("unknown tier `{s}` (f80, f90, f95)"))
}

fn parse_style(s: &str) -> Result<NumberStyle, String> {
    match s {
        "compact" => Ok(NumberStyle::Compact),
        "fixed" => Ok(NumberStyle::Fixed),
        _ => Err(format!("unknown number style `{s}` (compact, fixed)")),
    }
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Image file (IDX image file with its label file alongside, or CSV)
    pub input: PathBuf,
    /// Parent directory of the dataset directory
    #[arg(long, short)]
    pub out: PathBuf,
    /// Input format [default: from the extension]
    #[arg(long, value_parser = parse_with::<ImageFormat>)]
    pub format: Option<ImageFormat>,
    #[arg(long, default_value = "train_orig", value_parser = parse_with::<DataKind>)]
    pub kind: DataKind,
    #[arg(long = "data-type", default_value = "mnist_784", value_parser = parse_with::<DataType>)]
    pub data_type: DataType,
    /// Fidelity tier; sets the default gate budget and target
    #[arg(long, default_value = "f80", value_parser = parse_tier)]
    pub tier: FidelityTier,
    #[arg(long)]
    pub max_gates: Option<usize>,
    #[arg(long)]
    pub delta: Option<usize>,
    #[arg(long)]
    pub initial_gates: Option<usize>,
    #[arg(long)]
    pub target_fidelity: Option<f64>,
    /// Sweeps per growth step
    #[arg(long)]
    pub sweeps: Option<usize>,
    /// Run every sweep even after the target is reached
    #[arg(long)]
    pub full_sweeps: bool,
    /// Encode only the first N images
    #[arg(long)]
    pub limit: Option<usize>,
    /// Augment each image before encoding
    #[arg(long, value_parser = parse_with::<Augmentation>)]
    pub augment: Option<Augmentation>,
    /// Seed for augmentation
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write records that miss the target (and skip failing ones) instead of stopping
    #[arg(long)]
    pub keep_going: bool,
}

#[derive(Debug, Args)]
pub struct ToBaseArgs {
    /// Dense QASM file or dataset directory
    pub input: PathBuf,
    /// Output file (default: standard output) or, for a dataset, the parent directory
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TokenizeArgs {
    /// Dense QASM file or dataset directory
    pub input: PathBuf,
    /// Output file (default: standard output) or, for a dataset, a directory
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub decimals: u32,
    #[arg(long, default_value = "compact", value_parser = parse_style)]
    pub style: NumberStyle,
    /// Emit imaginary parts too
    #[arg(long)]
    pub imaginary: bool,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[arg(long, default_value = "statevector", value_parser = parse_with::<KernelMode>)]
    pub mode: KernelMode,
}

#[derive(Debug, Args)]
pub struct GramArgs {
    pub dataset: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Earlier Gram file whose entries may be reused
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[command(flatten)]
    pub kernel: KernelArgs,
}

#[derive(Debug, Args)]
pub struct SvmArgs {
    #[arg(long, default_value = "one-vs-one", value_parser = parse_with::<Strategy>)]
    pub strategy: Strategy,
    /// Penalty C
    #[arg(long = "c", default_value_t = DEFAULT_C_PENALTY)]
    pub c_penalty: f64,
    /// KKT violation at which SMO stops
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    pub max_iterations: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub dataset: PathBuf,
    /// Where to write the model
    #[arg(long, short)]
    pub model: PathBuf,
    /// Precomputed Gram matrix of the dataset
    #[arg(long)]
    pub gram: Option<PathBuf>,
    #[command(flatten)]
    pub svm: SvmArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Dataset to classify
    pub dataset: PathBuf,
    #[arg(long, short)]
    pub model: PathBuf,
    /// Dataset the model was trained on
    #[arg(long)]
    pub train: PathBuf,
    /// Predictions file: `index predicted label` per line
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub kernel: KernelArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(required = true)]
    pub datasets: Vec<PathBuf>,
    /// Violations to print per dataset
    #[arg(long, default_value_t = 20)]
    pub max_report: usize,
}
