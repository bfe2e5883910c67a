use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pcle_core::baselines::Boundary;
use pcle_core::fibresim::ExtractionMode;
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "pcle", version, about = "pCLE super-resolution experiment toolkit")]
pub struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "PCLE_THREADS")]
    pub threads: Option<usize>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Simulate fibre-bundle LR frames from HR images.
    Simulate(SimulateArgs),
    /// Register and fuse frame sequences, back-project per-frame HR estimates.
    Mosaic(MosaicArgs),
    /// Score methods against HR and LR images.
    Evaluate(EvaluateArgs),
    /// Classical enhancement baselines.
    Baseline {
        #[command(subcommand)]
        which: BaselineCommand,
    },
    /// Sequence-level splits and LR/HR pair manifests.
    Dataset {
        #[command(subcommand)]
        which: DatasetCommand,
    },
    /// Blinded opinion-score survey bundles and score export.
    Survey {
        #[command(subcommand)]
        which: SurveyCommand,
    },
    /// Serve a survey bundle to raters.
    #[serde(skip)]
    Serve(ServeArgs),
    /// Re-execute a run from its run.json and compare output hashes.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FovKind {
    /// Every pixel is valid.
    Full,
    /// Centred disc of diameter min(width, height) minus twice the margin.
    Circular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    VoronoiAverage,
    SevenPixelAverage,
}

impl From<ModeArg> for ExtractionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::VoronoiAverage => ExtractionMode::VoronoiAverage,
            ModeArg::SevenPixelAverage => ExtractionMode::SevenPixelAverage,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryArg {
    Symmetric,
    Periodic,
}

impl From<BoundaryArg> for Boundary {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Symmetric => Boundary::Symmetric,
            BoundaryArg::Periodic => Boundary::Periodic,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct LayoutArgs {
    /// Fibre layout CSV (fibre_id,x,y); generated from the lattice flags when absent.
    #[arg(long)]
    pub layout: Option<PathBuf>,
    #[arg(long, default_value_t = 4.0)]
    pub layout_spacing: f64,
    #[arg(long, default_value_t = 0.3)]
    pub layout_jitter: f64,
    /// Defaults to --seed.
    #[arg(long)]
    pub layout_seed: Option<u64>,
    #[arg(long, default_value_t = 0.05)]
    pub sigma_mult: f64,
    #[arg(long, default_value_t = 0.01)]
    pub sigma_add_rel: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::VoronoiAverage)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = FovKind::Circular)]
    pub fov: FovKind,
    #[arg(long, default_value_t = 0.0)]
    pub fov_margin: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// HR image file or directory of PNG/PGM images.
    #[arg(long)]
    pub hr: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub layout: LayoutArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MosaicArgs {
    /// A directory of numbered frames, or a directory of such directories.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub taper: Option<f64>,
    #[arg(long)]
    pub peak_sigma: Option<f64>,
    #[arg(long)]
    pub refine_iterations: Option<usize>,
    #[arg(long)]
    pub refine_whitening: Option<f64>,
    #[arg(long)]
    pub polish_iterations: Option<usize>,
    /// Exclude frames whose registration residual exceeds this.
    #[arg(long)]
    pub max_frame_residual: Option<f64>,
    /// Reject sequences whose median frame residual exceeds this.
    #[arg(long)]
    pub max_sequence_residual: Option<f64>,
    #[arg(long, value_enum, default_value_t = FovKind::Full)]
    pub fov: FovKind,
    #[arg(long, default_value_t = 0.0)]
    pub fov_margin: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MetricArgs {
    #[arg(long)]
    pub ssim_window: Option<usize>,
    #[arg(long)]
    pub ssim_sigma: Option<f64>,
    #[arg(long)]
    pub ssim_k1: Option<f64>,
    #[arg(long)]
    pub ssim_k2: Option<f64>,
    #[arg(long)]
    pub dynamic_range: Option<f64>,
    #[arg(long)]
    pub gcf_gamma: Option<f64>,
    /// Comma-separated superpixel factors, finest first.
    #[arg(long, value_delimiter = ',')]
    pub gcf_factors: Option<Vec<usize>>,
    /// Comma-separated level weights, one per factor.
    #[arg(long, value_delimiter = ',')]
    pub gcf_weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub hr: PathBuf,
    #[arg(long)]
    pub lr: PathBuf,
    /// Method outputs as NAME=DIR; repeatable.
    #[arg(long = "method", value_name = "NAME=DIR")]
    pub methods: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub metrics: MetricArgs,
    #[arg(long, value_enum, default_value_t = FovKind::Full)]
    pub fov: FovKind,
    #[arg(long, default_value_t = 0.0)]
    pub fov_margin: f64,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineCommand {
    /// Wiener deconvolution with a Gaussian PSF.
    Wiener(WienerArgs),
    /// Unsharp-mask sharpening.
    Sharpen(SharpenArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct WienerArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    pub psf_sigma: f64,
    #[arg(long, default_value_t = 0.01)]
    pub nsr: f64,
    #[arg(long, default_value_t = 4.0)]
    pub psf_support: f64,
    #[arg(long, value_enum, default_value_t = BoundaryArg::Symmetric)]
    pub boundary: BoundaryArg,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SharpenArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1.5)]
    pub radius: f64,
    #[arg(long, default_value_t = 1.0)]
    pub amount: f64,
    /// Keep values outside [0, 1] instead of clamping.
    #[arg(long)]
    pub no_clamp: bool,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetCommand {
    /// Stratified, sequence-atomic train/validation/test split.
    Split(SplitArgs),
    /// LR/HR pair manifest from acquired or simulated LR frames.
    Pairs(PairsArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SplitArgs {
    /// CSV with sequence_id,tissue_label,probe_id,frame_dir.
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.7,0.15,0.15")]
    pub fractions: Vec<f64>,
    /// Allowed tissue labels, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub labels: Option<Vec<String>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PairsArgs {
    #[arg(long)]
    pub records: PathBuf,
    /// split.csv written by `dataset split`.
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long)]
    pub hr_root: PathBuf,
    /// Acquired LR frames mirroring the HR layout. Without it LR frames are simulated.
    #[arg(long)]
    pub lr_root: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub layout: LayoutArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurveyCommand {
    /// Build a blinded bundle (public/) and its key (private/key.json).
    Prep(PrepArgs),
    /// Unblind a score log and aggregate per method and question.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PrepArgs {
    /// LR input frames shown as the first reference.
    #[arg(long)]
    pub input: PathBuf,
    /// Pseudo ground truth shown as the second reference.
    #[arg(long)]
    pub hr: PathBuf,
    /// Candidate outputs as NAME=DIR; exactly four.
    #[arg(long = "method", value_name = "NAME=DIR")]
    pub methods: Vec<String>,
    #[arg(long, default_value_t = 46)]
    pub n_cases: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Registered rater ids, comma-separated; any id is accepted when empty.
    #[arg(long, value_delimiter = ',')]
    pub raters: Vec<String>,
    /// Per-rater random subsets of this many cases instead of a shared set.
    #[arg(long)]
    pub cases_per_rater: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ExportArgs {
    /// Score log written by `serve`.
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long)]
    pub key: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    /// Public bundle directory (the `public/` written by `survey prep`).
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: std::net::SocketAddr,
    /// Frontend build to serve at `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub run_json: PathBuf,
    /// Write to this directory instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
