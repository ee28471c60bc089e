//! Command-line surface: one binary, one subcommand per pipeline stage.
//! Every value here is optional wherever a config-file entry or a built-in
//! default can fill it; resolution order is flag > config file > default.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "vnet",
    version,
    about = "Learned effective two-body interaction tensors: synthetic data, training, prediction, analysis",
    after_help = "Environment: VNET_THREADS caps worker threads (compute paths are currently \
                  sequential; the value is validated and recorded in run manifests)."
)]
pub struct Cli {
    /// TOML settings file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Root seed for every random draw of the command.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate bare/effective tensor files on a geometry grid.
    GenSynthetic(GenSyntheticArgs),
    /// Fit the bare phase on every geometry of a data set.
    Pretrain(PretrainArgs),
    /// Adapt a pretrained model to effective reference geometries.
    Finetune(FinetuneArgs),
    /// Train the Fourier-feature baseline on the same references.
    FfmTrain(FfmTrainArgs),
    /// Evaluate a trained model at one geometry and write the tensor.
    Predict(PredictArgs),
    /// Per-geometry error table between two tensor sources.
    Metrics(MetricsArgs),
    /// Kernel eigenbasis screening profile and tangent fit.
    KernelAnalysis(KernelAnalysisArgs),
    /// Active-space ground-state energy decomposition per geometry.
    Energy(EnergyArgs),
    /// Finite-difference verification of the training gradient.
    GradCheck(GradCheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Bare,
    Effective,
}

#[derive(Debug, Args)]
pub struct GenSyntheticArgs {
    /// Directory for the tensor files and their manifest.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,

    /// Active-space size.
    #[arg(long, value_name = "N")]
    pub n_act: Option<usize>,

    /// Geometries: comma list ("1.0,1.3,1.7") or inclusive range "start:stop:count".
    #[arg(long, value_name = "SPEC")]
    pub geometries: Option<String>,

    /// Bare interaction, e.g. "soft-coulomb:delta=0.3".
    #[arg(long, value_name = "SPEC")]
    pub bare_kernel: Option<String>,

    /// Effective interaction, e.g. "yukawa:mu=1.5,delta=0.3" or "gaussian:sigma=2.0".
    #[arg(long, value_name = "SPEC")]
    pub eff_kernel: Option<String>,

    /// Harmonic-well curvature of the one-body term.
    #[arg(long, value_name = "W")]
    pub omega: Option<f64>,

    /// Quadrature points per axis.
    #[arg(long, value_name = "Q")]
    pub n_quad: Option<usize>,

    /// Grid half-width beyond R/2.
    #[arg(long, value_name = "P")]
    pub padding: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainFlags {
    #[arg(long, value_name = "N")]
    pub epochs: Option<usize>,

    #[arg(long, value_name = "RATE")]
    pub lr0: Option<f64>,

    #[arg(long, value_name = "N")]
    pub batch_size: Option<usize>,

    /// Held-out evaluation cadence in epochs (0 = only the final epoch).
    #[arg(long, value_name = "K")]
    pub heldout_every: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ModelFlags {
    /// Latent feature length.
    #[arg(long, value_name = "L")]
    pub ell: Option<usize>,

    /// Hidden width of the orbital network.
    #[arg(long, value_name = "M")]
    pub width: Option<usize>,

    /// Weight layers in the orbital network (>= 2).
    #[arg(long, value_name = "D")]
    pub depth: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    /// Data directory holding a generation manifest.
    #[arg(long, value_name = "DIR")]
    pub data_dir: PathBuf,

    /// Checkpoint to write.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,

    /// Loss history CSV (default: checkpoint path with extension loss.csv).
    #[arg(long, value_name = "FILE")]
    pub loss_csv: Option<PathBuf>,

    #[command(flatten)]
    pub model: ModelFlags,

    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    #[arg(long, value_name = "DIR")]
    pub data_dir: PathBuf,

    /// Pretrained checkpoint to start from.
    #[arg(
        long,
        value_name = "FILE",
        required_unless_present = "from_scratch",
        conflicts_with = "from_scratch"
    )]
    pub checkpoint: Option<PathBuf>,

    /// Ablation: random initialization instead of a pretrained checkpoint.
    #[arg(long)]
    pub from_scratch: bool,

    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,

    /// Reference geometries, comma-separated (default "1.15,1.45,1.95,2.45").
    #[arg(long, value_name = "LIST")]
    pub refs: Option<String>,

    #[arg(long, value_name = "FILE")]
    pub loss_csv: Option<PathBuf>,

    /// Model shape for --from-scratch runs (otherwise taken from the checkpoint).
    #[command(flatten)]
    pub model: ModelFlags,

    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct FfmTrainArgs {
    #[arg(long, value_name = "DIR")]
    pub data_dir: PathBuf,

    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,

    #[arg(long, value_name = "LIST")]
    pub refs: Option<String>,

    #[arg(long, value_name = "FILE")]
    pub loss_csv: Option<PathBuf>,

    /// Random frequency count (feature length is twice this).
    #[arg(long, value_name = "F")]
    pub n_freq: Option<usize>,

    /// Frequency scale of the random embedding.
    #[arg(long, value_name = "S")]
    pub sigma_f: Option<f64>,

    #[arg(long, value_name = "M")]
    pub width: Option<usize>,

    #[arg(long, value_name = "D")]
    pub depth: Option<usize>,

    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,

    /// Center separation to evaluate at.
    #[arg(long, value_name = "R", allow_negative_numbers = true)]
    pub geometry: f64,

    /// Tensor file to write.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,

    /// Timing trials to average.
    #[arg(long, value_name = "N", default_value_t = 10)]
    pub trials: usize,

    /// Electron count stamped into the output header.
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub n_elec: usize,

    /// Twice the spin projection stamped into the output header.
    #[arg(
        long,
        value_name = "M",
        default_value_t = 0,
        allow_negative_numbers = true
    )]
    pub ms2: i64,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Reference source: data directory or run-manifest path.
    #[arg(long, value_name = "PATH")]
    pub reference: PathBuf,

    /// Predicted source: data directory or run-manifest path.
    #[arg(
        long,
        value_name = "PATH",
        required_unless_present = "checkpoint",
        conflicts_with = "checkpoint"
    )]
    pub predicted: Option<PathBuf>,

    /// Predict from this checkpoint at the reference geometries instead.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,

    /// Which tensor series to compare.
    #[arg(long, value_enum, default_value_t = KindArg::Effective)]
    pub kind: KindArg,

    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct KernelAnalysisArgs {
    /// Checkpoint holding both kernels.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,

    /// Ratio-profile CSV to write.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EnergyArgs {
    #[arg(long, value_name = "DIR")]
    pub data_dir: PathBuf,

    #[arg(long, value_name = "N")]
    pub n_elec: usize,

    #[arg(
        long,
        value_name = "M",
        default_value_t = 0,
        allow_negative_numbers = true
    )]
    pub ms2: i32,

    /// Which stored series to decompose.
    #[arg(long, value_enum, default_value_t = KindArg::Effective)]
    pub kind: KindArg,

    /// Subset of geometries, comma-separated (default: all in the data set).
    #[arg(long, value_name = "LIST")]
    pub geometries: Option<String>,

    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,

    /// Also decompose predicted tensors from this checkpoint.
    #[arg(long, value_name = "FILE", requires = "predicted_out")]
    pub checkpoint: Option<PathBuf>,

    /// CSV for the predicted-tensor decomposition.
    #[arg(long, value_name = "FILE", requires = "checkpoint")]
    pub predicted_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    #[arg(long, value_name = "N", default_value_t = 3)]
    pub n_act: usize,

    #[arg(long, value_name = "L", default_value_t = 8)]
    pub ell: usize,

    #[arg(long, value_name = "M", default_value_t = 10)]
    pub width: usize,

    #[arg(long, value_name = "D", default_value_t = 3)]
    pub depth: usize,

    #[arg(long, value_name = "N", default_value_t = 20)]
    pub batches: usize,

    #[arg(long, value_name = "N", default_value_t = 12)]
    pub batch_size: usize,

    #[arg(long, value_name = "H", default_value_t = 1e-5)]
    pub fd_step: f64,

    /// Negative control: corrupt one analytic gradient entry and expect failure.
    #[arg(long)]
    pub corrupt: bool,
}
