use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};
use qseg_core::clustering::{InitStrategy, Method};
use qseg_core::imaging::Connectivity;
use qseg_core::optim::Algorithm;
use qseg_core::pipeline::Backend;
use qseg_core::protocols::{DistanceEstimator, EncoderKind, Protocol};
use qseg_core::vqc::AnsatzKind;
use serde::Serialize;

fn choice<T>(parse: fn(&str) -> Option<T>, choices: &'static str) -> impl Fn(&str) -> Result<T, String> + Clone {
    move |s| parse(s).ok_or_else(|| format!("expected one of: {choices}"))
}

fn method(s: &str) -> Option<Method> {
    match s {
        "quantum" | "qmeans" => Some(Method::Quantum),
        "classical" | "kmeans" => Some(Method::Classical),
        _ => None,
    }
}

fn backend(s: &str) -> Option<Backend> {
    match s {
        "quantum" => Some(Backend::Quantum),
        "classical" => Some(Backend::Classical),
        _ => None,
    }
}

fn encoder(s: &str) -> Option<EncoderKind> {
    match s {
        "angle-ry" | "angle" | "ry" => Some(EncoderKind::AngleRy),
        "phase-hrz" | "phase" => Some(EncoderKind::PhaseHrz),
        _ => None,
    }
}

fn init(s: &str) -> Option<InitStrategy> {
    match s {
        "spread" => Some(InitStrategy::Spread),
        "random" => Some(InitStrategy::Random),
        _ => None,
    }
}

fn connectivity(s: &str) -> Option<Connectivity> {
    match s {
        "4" | "four" => Some(Connectivity::Four),
        "8" | "eight" => Some(Connectivity::Eight),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    Images,
    Features,
}

fn synth_kind(s: &str) -> Option<SynthKind> {
    match s {
        "images" => Some(SynthKind::Images),
        "features" => Some(SynthKind::Features),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scene {
    Default,
    SquareBlobs,
}

fn scene(s: &str) -> Option<Scene> {
    match s {
        "default" => Some(Scene::Default),
        "square-blobs" => Some(Scene::SquareBlobs),
        _ => None,
    }
}

/// Hybrid quantum-classical crack classification and segmentation.
#[derive(Debug, Parser, Serialize)]
#[command(name = "qseg", version, args_override_self = true, propagate_version = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(next_help_heading = "Global options")]
pub struct GlobalArgs {
    /// Base seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Shots per circuit, 0 for exact evaluation. bench-distance takes a
    /// comma-separated list.
    #[arg(long, global = true)]
    pub shots: Option<String>,
    /// Directory receiving every output and the run manifest.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// TOML file with default flag values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for parallel stages; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Also render PNG charts of the CSV series.
    #[arg(long, global = true)]
    pub plots: bool,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate a synthetic image corpus or feature table.
    SynthGen(SynthGenArgs),
    /// Train the image-level classifier (the gate).
    TrainImageClf(TrainImageArgs),
    /// Train the region classifier on segmented corpus regions.
    TrainSegmentClf(TrainSegmentArgs),
    /// Score feature rows or images with a trained classifier.
    Classify(ClassifyArgs),
    /// Cluster the pixels of one image.
    Qmeans(QmeansArgs),
    /// Segment one image without the gate.
    Segment(SegmentArgs),
    /// Run the full pipeline on one image.
    PipelineRun(PipelineRunArgs),
    /// Run the pipeline on a corpus and report IoU and confusion matrices.
    Evaluate(EvaluateArgs),
    /// Distance-estimation error against shot count.
    BenchDistance(BenchArgs),
}

impl Command {
    pub const NAMES: [&'static str; 9] = [
        "synth-gen",
        "train-image-clf",
        "train-segment-clf",
        "classify",
        "qmeans",
        "segment",
        "pipeline-run",
        "evaluate",
        "bench-distance",
    ];

    pub fn name(&self) -> &'static str {
        let i = match self {
            Command::SynthGen(_) => 0,
            Command::TrainImageClf(_) => 1,
            Command::TrainSegmentClf(_) => 2,
            Command::Classify(_) => 3,
            Command::Qmeans(_) => 4,
            Command::Segment(_) => 5,
            Command::PipelineRun(_) => 6,
            Command::Evaluate(_) => 7,
            Command::BenchDistance(_) => 8,
        };
        Self::NAMES[i]
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PreprocessArgs {
    /// Working width after downscaling.
    #[arg(long, default_value_t = 50)]
    pub width: usize,
    #[arg(long, default_value_t = 50)]
    pub height: usize,
    /// Gaussian blur sigma.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClusterArgs {
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// quantum (q-means) or classical (k-means).
    #[arg(long, default_value = "quantum", value_parser = choice(method, "quantum, classical"))]
    pub method: Method,
    #[arg(long, default_value = "overlap", value_parser = choice(Protocol::parse, "overlap, swap, hadamard"))]
    pub protocol: Protocol,
    /// Pixels evaluated by one product circuit.
    #[arg(long, default_value_t = 16)]
    pub batch_qubits: usize,
    #[arg(long, default_value_t = 100)]
    pub cluster_iters: usize,
    /// Centroid shift, in gray levels, that ends clustering.
    #[arg(long, default_value_t = 0.5)]
    pub tol: f64,
    #[arg(long, default_value = "spread", value_parser = choice(init, "spread, random"))]
    pub init: InitStrategy,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RegionArgs {
    /// Smallest region kept, in pixels.
    #[arg(long, default_value_t = 3)]
    pub min_region_size: usize,
    #[arg(long, default_value = "8", value_parser = choice(connectivity, "4, 8"))]
    pub connectivity: Connectivity,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FilterArgs {
    /// Crack regions with a smaller oriented-box aspect ratio are demoted;
    /// 0 disables the filter.
    #[arg(long, default_value_t = 2.5)]
    pub aspect_threshold: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, default_value = "quantum", value_parser = choice(backend, "quantum, classical"))]
    pub backend: Backend,
    #[arg(long, default_value = "basic", value_parser = choice(AnsatzKind::parse, "strongly, basic, fixed"))]
    pub ansatz: AnsatzKind,
    /// Circuit width, and the number of PCA components kept.
    #[arg(long, default_value_t = 4)]
    pub qubits: usize,
    #[arg(long, default_value_t = 3)]
    pub layers: usize,
    #[arg(long, default_value = "angle-ry", value_parser = choice(encoder, "angle-ry, phase-hrz"))]
    pub encoder: EncoderKind,
    #[arg(long, default_value = "cobyla", value_parser = choice(Algorithm::parse, "cobyla, nelder-mead"))]
    pub optimizer: Algorithm,
    /// Optimizer iterations, one loss evaluation each.
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0.5)]
    pub rho_begin: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub rho_end: f64,
    /// Loss evaluations averaged per iteration.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Adam step size of the classical backend.
    #[arg(long, default_value_t = 0.05)]
    pub learning_rate: f64,
    /// Full-batch epochs of the classical backend.
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.25)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 0.25)]
    pub val_fraction: f64,
    /// Rebalance to this positive share before splitting.
    #[arg(long)]
    pub positive_fraction: Option<f64>,
    /// Examples drawn when rebalancing.
    #[arg(long)]
    pub total: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthGenArgs {
    #[arg(long, default_value = "images", value_parser = choice(synth_kind, "images, features"))]
    pub kind: SynthKind,
    /// Images to generate.
    #[arg(long, default_value_t = 50)]
    pub count: usize,
    /// Share of images with a crack.
    #[arg(long, default_value_t = 0.8)]
    pub crack_fraction: f64,
    #[arg(long, default_value = "default", value_parser = choice(scene, "default, square-blobs"))]
    pub scene: Scene,
    #[arg(long, default_value_t = 100)]
    pub image_width: usize,
    #[arg(long, default_value_t = 100)]
    pub image_height: usize,
    /// Feature rows to generate.
    #[arg(long, default_value_t = 1000)]
    pub rows: usize,
    #[arg(long, default_value_t = 4)]
    pub dims: usize,
    #[arg(long, default_value_t = 0.5)]
    pub positive_fraction: f64,
    /// Distance between class means in standard deviations.
    #[arg(long, default_value_t = 6.0)]
    pub separation: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(group(ArgGroup::new("source").required(true).args(["corpus", "features"])))]
pub struct TrainImageArgs {
    /// Corpus directory with images/ and masks/.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// CSV feature table; trains a tabular model.
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[command(flatten)]
    pub preprocess: PreprocessArgs,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainSegmentArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub preprocess: PreprocessArgs,
    #[command(flatten)]
    pub cluster: ClusterArgs,
    #[command(flatten)]
    pub regions: RegionArgs,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(group(ArgGroup::new("source").required(true).args(["features", "input", "corpus"])))]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// One image, scored by an image-gate model.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Every image of a corpus, scored by an image-gate model.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[command(flatten)]
    pub preprocess: PreprocessArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct QmeansArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Cluster the grayscale image at full resolution without blurring.
    #[arg(long)]
    pub raw: bool,
    #[command(flatten)]
    pub preprocess: PreprocessArgs,
    #[command(flatten)]
    pub cluster: ClusterArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SegmentArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub segment_model: PathBuf,
    /// Ground-truth mask for IoU scoring.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[command(flatten)]
    pub preprocess: PreprocessArgs,
    #[command(flatten)]
    pub cluster: ClusterArgs,
    #[command(flatten)]
    pub regions: RegionArgs,
    #[command(flatten)]
    pub filter: FilterArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PipelineRunArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub gate_model: PathBuf,
    #[arg(long)]
    pub segment_model: PathBuf,
    /// Ground-truth mask for IoU scoring.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[command(flatten)]
    pub preprocess: PreprocessArgs,
    #[command(flatten)]
    pub cluster: ClusterArgs,
    #[command(flatten)]
    pub regions: RegionArgs,
    #[command(flatten)]
    pub filter: FilterArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub gate_model: PathBuf,
    #[arg(long)]
    pub segment_model: PathBuf,
    /// Also write every predicted mask.
    #[arg(long)]
    pub save_masks: bool,
    #[command(flatten)]
    pub preprocess: PreprocessArgs,
    #[command(flatten)]
    pub cluster: ClusterArgs,
    #[command(flatten)]
    pub regions: RegionArgs,
    #[command(flatten)]
    pub filter: FilterArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    /// Comma-separated protocols.
    #[arg(long, default_value = "overlap", value_delimiter = ',',
          value_parser = choice(Protocol::parse, "overlap, swap, hadamard"))]
    pub protocol: Vec<Protocol>,
    /// Centroid intensities.
    #[arg(long, default_value = "0,50,100,150,200,250", value_delimiter = ',')]
    pub c: Vec<u8>,
    /// Pixel intensities swept per centroid; all 256 levels by default.
    #[arg(long, value_delimiter = ',')]
    pub p: Vec<u8>,
    /// Seeds per shot count.
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    #[arg(long, default_value = "calibrated", value_parser = choice(DistanceEstimator::parse, "calibrated, convention"))]
    pub estimator: DistanceEstimator,
}
