//! End-to-end crack segmentation: image gate, q-means segmentation, region
//! classification, aspect-ratio post-filter and IoU scoring.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::{self, AdamConfig, BaselineError, BaselineReport, LogisticModel};
use crate::clustering::{segment_image, ClusterConfig, ClusterError, ClusterState, Method};
use crate::descriptors::{image_descriptor, region_descriptor, IMAGE_DESCRIPTOR_LEN, REGION_DESCRIPTOR_LEN};
use crate::features::{split_dataset, FeatureError, FeatureMatrix, Preprocessor, SplitConfig};
use crate::imaging::{
    downscale, extract_regions, gaussian_blur5, generate_crack_image, iou, isolate_region, to_grayscale, ColorImage,
    Connectivity, GrayImage, ImageError, Mask, OrientedBox, SceneConfig,
};
use crate::protocols::EncoderKind;
use crate::rng::derive_seed;
use crate::vqc::{
    confusion, convergence_iteration, train, Ansatz, AnsatzKind, Confusion, Execution, TrainConfig, TrainReport,
    VqcError, VqcModel,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("{0} model given where {1} model expected")]
    WrongModel(ModelKind, ModelKind),
    #[error("{kind} model expects {expected} features, the descriptor yields {got}")]
    FeatureMismatch {
        kind: ModelKind,
        expected: usize,
        got: usize,
    },
    #[error("model reduces to {reduced} features but its circuit has {qubits} qubits")]
    QubitMismatch { reduced: usize, qubits: usize },
    #[error("ground truth is {0}x{1}, image is {2}x{3}")]
    TruthSize(usize, usize, usize, usize),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("no training examples of class {0:+}")]
    MissingClass(i8),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Vqc(#[from] VqcError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

/// Grayscale, area-downscale and blur settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub width: usize,
    pub height: usize,
    pub sigma: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            width: 50,
            height: 50,
            sigma: 1.0,
        }
    }
}

pub fn preprocess_gray(img: &GrayImage, cfg: &PreprocessConfig) -> Result<GrayImage, PipelineError> {
    let small = downscale(img, cfg.width, cfg.height)?;
    Ok(gaussian_blur5(&small, cfg.sigma)?)
}

pub fn preprocess(img: &ColorImage, cfg: &PreprocessConfig) -> Result<GrayImage, PipelineError> {
    preprocess_gray(&to_grayscale(img)?, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Decides whether an image shows a crack at all.
    ImageGate,
    /// Decides whether a segmented region is crack material.
    SegmentFilter,
    /// Trained on externally supplied feature rows of any width.
    Tabular,
}

impl ModelKind {
    /// Width of the built-in descriptor the model consumes, if any.
    pub fn descriptor_len(self) -> Option<usize> {
        match self {
            ModelKind::ImageGate => Some(IMAGE_DESCRIPTOR_LEN),
            ModelKind::SegmentFilter => Some(REGION_DESCRIPTOR_LEN),
            ModelKind::Tabular => None,
        }
    }
}

impl core::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            ModelKind::ImageGate => "image-gate",
            ModelKind::SegmentFilter => "segment-filter",
            ModelKind::Tabular => "tabular",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub shots: u64,
    pub iterations: usize,
    pub converged_at: usize,
    pub train_rows: usize,
    pub final_train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
}

/// Decision function of a classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "kebab-case")]
pub enum Head {
    Quantum(VqcModel),
    Classical(LogisticModel),
}

impl Head {
    pub fn inputs(&self) -> usize {
        match self {
            Head::Quantum(m) => m.qubits(),
            Head::Classical(m) => m.features(),
        }
    }

    pub fn backend(&self) -> Backend {
        match self {
            Head::Quantum(_) => Backend::Quantum,
            Head::Classical(_) => Backend::Classical,
        }
    }
}

/// Which classifier family to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    #[default]
    Quantum,
    Classical,
}

/// A trained classifier with its feature preprocessing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub kind: ModelKind,
    pub preprocessor: Preprocessor,
    pub head: Head,
    pub metadata: TrainingMetadata,
}

impl Classifier {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if let Some(expected) = self.kind.descriptor_len() {
            if self.preprocessor.d_in() != expected {
                return Err(PipelineError::FeatureMismatch {
                    kind: self.kind,
                    expected: self.preprocessor.d_in(),
                    got: expected,
                });
            }
        }
        if self.preprocessor.d_out() != self.head.inputs() {
            return Err(PipelineError::QubitMismatch {
                reduced: self.preprocessor.d_out(),
                qubits: self.head.inputs(),
            });
        }
        Ok(())
    }

    /// Signed score for raw descriptor values: `forward + bias` for the
    /// quantum head, `2p - 1` for the classical one. `exec` only affects
    /// the quantum head.
    pub fn score(&self, raw: &[f64], exec: Execution) -> Result<f64, PipelineError> {
        if raw.len() != self.preprocessor.d_in() {
            return Err(PipelineError::FeatureMismatch {
                kind: self.kind,
                expected: self.preprocessor.d_in(),
                got: raw.len(),
            });
        }
        let x = self.preprocessor.apply_row(raw)?;
        Ok(match &self.head {
            Head::Quantum(m) => m.forward(&x, exec)? + m.bias,
            Head::Classical(m) => m.score(&x)?,
        })
    }

    pub fn predict(&self, raw: &[f64], exec: Execution) -> Result<i8, PipelineError> {
        Ok(if self.score(raw, exec)? >= 0.0 { 1 } else { -1 })
    }
}

/// How to build and train a classifier from raw descriptors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub backend: Backend,
    pub ansatz: AnsatzKind,
    /// Qubits of the circuit, and the PCA output width for either backend.
    pub qubits: usize,
    pub layers: usize,
    pub encoder: EncoderKind,
    pub split: SplitConfig,
    pub train: TrainConfig,
    pub baseline: AdamConfig,
    pub seed: u64,
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        Self {
            backend: Backend::Quantum,
            ansatz: AnsatzKind::BasicEntangling,
            qubits: 4,
            layers: 3,
            encoder: EncoderKind::AngleRy,
            split: SplitConfig::default(),
            train: TrainConfig::default(),
            baseline: AdamConfig::default(),
            seed: 0,
        }
    }
}

/// Training history of either backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "kebab-case")]
pub enum TrainingLog {
    Quantum(TrainReport),
    Classical(BaselineReport),
}

impl TrainingLog {
    pub fn train_loss(&self) -> &[f64] {
        match self {
            TrainingLog::Quantum(r) => &r.train_loss,
            TrainingLog::Classical(r) => &r.train_loss,
        }
    }

    pub fn val_loss(&self) -> &[f64] {
        match self {
            TrainingLog::Quantum(r) => &r.val_loss,
            TrainingLog::Classical(r) => &r.val_loss,
        }
    }
}

/// Outcome of [`train_classifier`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedClassifier {
    pub classifier: Classifier,
    pub report: TrainingLog,
    pub test: Confusion,
}

/// Splits, fits PCA and scaling on the training part, trains the chosen
/// backend and scores the held-out test part.
pub fn train_classifier(
    kind: ModelKind,
    data: &FeatureMatrix,
    spec: &ClassifierSpec,
) -> Result<TrainedClassifier, PipelineError> {
    for class in [1, -1] {
        if !data.labels().is_some_and(|l| l.contains(&class)) {
            return Err(PipelineError::MissingClass(class));
        }
    }
    let split = split_dataset(data, &spec.split, derive_seed(spec.seed, &[1]))?;
    let (preprocessor, train_x) = Preprocessor::fit(&split.train, spec.qubits)?;
    // Without a validation part the training data doubles as one.
    let val_raw = if split.val.is_empty() { &split.train } else { &split.val };
    let (val_x, _) = preprocessor.apply(val_raw)?;
    let test_x = if split.test.is_empty() {
        None
    } else {
        Some(preprocessor.apply(&split.test)?.0)
    };
    let (head, report, test) = match spec.backend {
        Backend::Quantum => {
            let ansatz = Ansatz::new(spec.ansatz, spec.qubits, spec.layers)?;
            let init = VqcModel::init(ansatz, spec.encoder, derive_seed(spec.seed, &[2]))?;
            let (model, report) = train(&init, &train_x, &val_x, &spec.train)?;
            let test = match &test_x {
                Some(t) => confusion(&model, t, spec.train.exec)?,
                None => Confusion::default(),
            };
            (Head::Quantum(model), TrainingLog::Quantum(report), test)
        }
        Backend::Classical => {
            let cfg = AdamConfig {
                seed: derive_seed(spec.seed, &[2]),
                ..spec.baseline.clone()
            };
            let (model, report) = baseline::train_logistic(&train_x, &val_x, &cfg)?;
            let test = match &test_x {
                Some(t) => baseline::confusion(&model, t)?,
                None => Confusion::default(),
            };
            (Head::Classical(model), TrainingLog::Classical(report), test)
        }
    };
    let metadata = match &report {
        TrainingLog::Quantum(r) => TrainingMetadata {
            seed: spec.seed,
            shots: spec.train.exec.shots,
            iterations: r.iterations,
            converged_at: r.converged_at,
            train_rows: train_x.rows(),
            final_train_loss: r.final_train_loss,
            train_accuracy: r.train_accuracy,
            val_accuracy: r.val_accuracy,
            test_accuracy: test.accuracy(),
        },
        TrainingLog::Classical(r) => TrainingMetadata {
            seed: spec.seed,
            shots: 0,
            iterations: r.train_loss.len(),
            converged_at: convergence_iteration(&running_min(&r.train_loss)),
            train_rows: train_x.rows(),
            final_train_loss: r.final_train_loss,
            train_accuracy: r.train_accuracy,
            val_accuracy: r.val_accuracy,
            test_accuracy: test.accuracy(),
        },
    };
    let classifier = Classifier {
        kind,
        preprocessor,
        head,
        metadata,
    };
    classifier.validate()?;
    Ok(TrainedClassifier {
        classifier,
        report,
        test,
    })
}

fn running_min(v: &[f64]) -> Vec<f64> {
    let mut best = f64::INFINITY;
    v.iter()
        .map(|&x| {
            best = best.min(x);
            best
        })
        .collect()
}

/// One synthetic surface with its crack mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: ColorImage,
    pub mask: Mask,
    pub has_crack: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub images: usize,
    /// The first `round(images * crack_fraction)` images carry a crack.
    pub crack_fraction: f64,
    pub scene: SceneConfig,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            images: 50,
            crack_fraction: 0.8,
            scene: SceneConfig::default(),
            seed: 0,
        }
    }
}

pub fn generate_corpus(spec: &CorpusSpec) -> Vec<Sample> {
    let n_crack = (spec.images as f64 * spec.crack_fraction).round() as usize;
    (0..spec.images)
        .map(|i| {
            let has_crack = i < n_crack;
            let scene = spec.scene.sample(has_crack, derive_seed(spec.seed, &[i as u64]));
            let (image, mask) = generate_crack_image(&scene);
            Sample { image, mask, has_crack }
        })
        .collect()
}

/// Image descriptors of a corpus, labelled by crack presence.
pub fn image_features(samples: &[Sample], cfg: &PreprocessConfig) -> Result<FeatureMatrix, PipelineError> {
    let mut rows = Vec::with_capacity(samples.len());
    for s in samples {
        rows.push(image_descriptor(&preprocess(&s.image, cfg)?));
    }
    let labels = samples.iter().map(|s| if s.has_crack { 1 } else { -1 }).collect();
    Ok(FeatureMatrix::from_rows(&rows, Some(labels))?)
}

/// A region counts as crack when at least half its pixels are crack pixels.
pub fn region_truth(pixels: &[(usize, usize)], truth: &Mask) -> i8 {
    let hits = pixels.iter().filter(|&&(x, y)| truth.get(x, y)).count();
    if 2 * hits >= pixels.len() {
        1
    } else {
        -1
    }
}

/// Region descriptors and truth labels of one corpus image; `index` picks
/// the clustering seed.
pub fn sample_region_features(
    sample: &Sample,
    index: usize,
    cfg: &PipelineConfig,
) -> Result<(Vec<Vec<f64>>, Vec<i8>), PipelineError> {
    let img = preprocess(&sample.image, &cfg.preprocess)?;
    let truth = sample.mask.downscale(img.width(), img.height())?;
    let cluster = ClusterConfig {
        seed: derive_seed(cfg.seed, &[index as u64, 2]),
        ..cfg.cluster.clone()
    };
    let seg = segment_image(&img, &cluster, cfg.method)?;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for r in extract_regions(&seg.candidates, cfg.connectivity, cfg.min_region_size) {
        rows.push(region_descriptor(&isolate_region(&img, &r)?, &r));
        labels.push(region_truth(&r.pixels, &truth));
    }
    Ok((rows, labels))
}

/// Region descriptors from segmenting every image, labelled against the
/// downscaled ground truth.
pub fn region_features(samples: &[Sample], cfg: &PipelineConfig) -> Result<FeatureMatrix, PipelineError> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let (r, l) = sample_region_features(s, i, cfg)?;
        rows.extend(r);
        labels.extend(l);
    }
    Ok(FeatureMatrix::from_rows(&rows, Some(labels))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    pub cluster: ClusterConfig,
    pub method: Method,
    /// Crack regions with a smaller aspect ratio are demoted; 0 disables.
    pub aspect_threshold: f64,
    pub connectivity: Connectivity,
    pub min_region_size: usize,
    /// Shots for classifier circuits; 0 is exact.
    pub classifier_shots: u64,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            preprocess: PreprocessConfig::default(),
            cluster: ClusterConfig::default(),
            method: Method::Quantum,
            aspect_threshold: 2.5,
            connectivity: Connectivity::Eight,
            min_region_size: 3,
            classifier_shots: 1000,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Every circuit evaluated exactly.
    pub fn exact() -> Self {
        Self {
            cluster: ClusterConfig {
                shots: 0,
                ..ClusterConfig::default()
            },
            classifier_shots: 0,
            ..Self::default()
        }
    }
}

/// Millisecond time source; the core crate never reads a clock itself.
pub trait Clock {
    fn now_ms(&self) -> f64;
}

/// Reports zero for every reading.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_ms(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimes {
    pub preprocess_ms: f64,
    pub gate_ms: f64,
    pub segmentation_ms: f64,
    pub regions_ms: f64,
    pub classification_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDecision {
    pub pixels: Vec<(usize, usize)>,
    pub bbox: OrientedBox,
    pub aspect_ratio: f64,
    pub score: f64,
    /// Classifier output before the post-filter.
    pub classified: i8,
    /// Label after the post-filter.
    pub label: i8,
    pub demoted: bool,
    /// Label implied by the ground truth, when one was given.
    pub truth: Option<i8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub gate: i8,
    pub gate_score: f64,
    /// The gate rejected the image and later stages did not run.
    pub early_exit: bool,
    pub clusters: Option<ClusterState>,
    pub no_contrast: bool,
    /// Darker-cluster pixels; empty on early exit.
    pub candidates: Mask,
    pub regions: Vec<RegionDecision>,
    /// Final crack mask at working resolution.
    pub mask: Mask,
    /// Ground truth resampled to working resolution.
    pub truth: Option<Mask>,
    pub iou: Option<f64>,
    pub timings: StageTimes,
}

/// Demotes crack-labelled regions whose aspect ratio is below `threshold`.
/// A threshold of 0 (or below) keeps every label. Returns the number of
/// demotions.
pub fn postfilter_regions(regions: &mut [RegionDecision], threshold: f64) -> usize {
    if threshold <= 0.0 {
        return 0;
    }
    let mut demoted = 0;
    for r in regions.iter_mut() {
        if r.classified == 1 && r.aspect_ratio < threshold {
            log::info!(
                "demoting {}-pixel region with aspect ratio {:.2} < {threshold}",
                r.pixels.len(),
                r.aspect_ratio
            );
            r.label = -1;
            r.demoted = true;
            demoted += 1;
        }
    }
    demoted
}

fn check_kind(c: &Classifier, kind: ModelKind) -> Result<(), PipelineError> {
    if c.kind != kind {
        return Err(PipelineError::WrongModel(c.kind, kind));
    }
    c.validate()
}

struct Prepared {
    img: GrayImage,
    truth: Option<Mask>,
}

fn prepare(image: &ColorImage, cfg: &PipelineConfig, ground_truth: Option<&Mask>) -> Result<Prepared, PipelineError> {
    if let Some(t) = ground_truth {
        if t.width() != image.width || t.height() != image.height {
            return Err(PipelineError::TruthSize(
                t.width(),
                t.height(),
                image.width,
                image.height,
            ));
        }
    }
    let img = preprocess(image, &cfg.preprocess)?;
    let truth = ground_truth
        .map(|t| t.downscale(img.width(), img.height()))
        .transpose()?;
    Ok(Prepared { img, truth })
}

fn classifier_exec(cfg: &PipelineConfig, parts: &[u64]) -> Execution {
    Execution {
        shots: cfg.classifier_shots,
        seed: derive_seed(cfg.seed, parts),
    }
}

/// Segmentation, region extraction, classification and post-filtering.
fn segment_stages(
    img: &GrayImage,
    segment: &Classifier,
    cfg: &PipelineConfig,
    result: &mut PipelineResult,
    clock: &dyn Clock,
) -> Result<(), PipelineError> {
    let t2 = clock.now_ms();
    let cluster = ClusterConfig {
        seed: derive_seed(cfg.seed, &[2]),
        ..cfg.cluster.clone()
    };
    let seg = segment_image(img, &cluster, cfg.method)?;
    let t3 = clock.now_ms();
    result.timings.segmentation_ms = t3 - t2;

    let regions = extract_regions(&seg.candidates, cfg.connectivity, cfg.min_region_size);
    let t4 = clock.now_ms();
    result.timings.regions_ms = t4 - t3;

    for (i, r) in regions.into_iter().enumerate() {
        let iso = isolate_region(img, &r)?;
        let score = segment.score(&region_descriptor(&iso, &r), classifier_exec(cfg, &[3, i as u64]))?;
        let classified = if score >= 0.0 { 1 } else { -1 };
        result.regions.push(RegionDecision {
            truth: result.truth.as_ref().map(|t| region_truth(&r.pixels, t)),
            bbox: r.bbox,
            aspect_ratio: r.aspect_ratio,
            pixels: r.pixels,
            score,
            classified,
            label: classified,
            demoted: false,
        });
    }
    postfilter_regions(&mut result.regions, cfg.aspect_threshold);
    for r in result.regions.iter().filter(|r| r.label == 1) {
        for &(x, y) in &r.pixels {
            result.mask.set(x, y, true);
        }
    }
    result.timings.classification_ms = clock.now_ms() - t4;
    result.candidates = seg.candidates;
    result.no_contrast = seg.no_contrast;
    result.clusters = Some(seg.state);
    Ok(())
}

fn empty_result(prep: &Prepared, gate: i8, gate_score: f64) -> PipelineResult {
    let (w, h) = (prep.img.width(), prep.img.height());
    PipelineResult {
        gate,
        gate_score,
        early_exit: gate < 0,
        clusters: None,
        no_contrast: false,
        candidates: Mask::empty(w, h),
        regions: Vec::new(),
        mask: Mask::empty(w, h),
        truth: prep.truth.clone(),
        iou: None,
        timings: StageTimes::default(),
    }
}

/// Runs every stage on one image.
///
/// `ground_truth` is at source resolution and is area-downscaled to the
/// working size before scoring.
pub fn run_pipeline(
    image: &ColorImage,
    gate: &Classifier,
    segment: &Classifier,
    cfg: &PipelineConfig,
    ground_truth: Option<&Mask>,
    clock: &dyn Clock,
) -> Result<PipelineResult, PipelineError> {
    check_kind(gate, ModelKind::ImageGate)?;
    check_kind(segment, ModelKind::SegmentFilter)?;
    let start = clock.now_ms();
    let prep = prepare(image, cfg, ground_truth)?;
    let t1 = clock.now_ms();

    let gate_score = gate.score(&image_descriptor(&prep.img), classifier_exec(cfg, &[1]))?;
    let gate_label = if gate_score >= 0.0 { 1 } else { -1 };
    let t2 = clock.now_ms();

    let mut result = empty_result(&prep, gate_label, gate_score);
    result.timings.preprocess_ms = t1 - start;
    result.timings.gate_ms = t2 - t1;
    if !result.early_exit {
        segment_stages(&prep.img, segment, cfg, &mut result, clock)?;
    }
    result.iou = result.truth.as_ref().map(|t| iou(&result.mask, t)).transpose()?;
    result.timings.total_ms = clock.now_ms() - start;
    Ok(result)
}

/// [`run_pipeline`] without the gate: every image is segmented. The result
/// records a passing gate with a NaN score.
pub fn run_segmentation(
    image: &ColorImage,
    segment: &Classifier,
    cfg: &PipelineConfig,
    ground_truth: Option<&Mask>,
    clock: &dyn Clock,
) -> Result<PipelineResult, PipelineError> {
    check_kind(segment, ModelKind::SegmentFilter)?;
    let start = clock.now_ms();
    let prep = prepare(image, cfg, ground_truth)?;
    let mut result = empty_result(&prep, 1, f64::NAN);
    result.timings.preprocess_ms = clock.now_ms() - start;
    segment_stages(&prep.img, segment, cfg, &mut result, clock)?;
    result.iou = result.truth.as_ref().map(|t| iou(&result.mask, t)).transpose()?;
    result.timings.total_ms = clock.now_ms() - start;
    Ok(result)
}

/// Per-image line of a corpus report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub index: usize,
    pub name: String,
    pub has_crack: bool,
    pub gate: i8,
    pub iou: f64,
    pub predicted_pixels: usize,
    pub truth_pixels: usize,
    pub regions: usize,
    pub crack_regions: usize,
    pub false_positive_regions: usize,
    pub demoted_regions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub images: Vec<ImageMetrics>,
    /// Mean IoU over every image (two empty masks score 1).
    pub mean_iou: f64,
    /// Mean IoU over images whose ground truth contains a crack.
    pub mean_iou_cracks: f64,
    pub gate: Confusion,
    /// Final region labels against region truth, gate-passed images only.
    pub regions: Confusion,
    pub false_positive_regions: usize,
    pub demoted_regions: usize,
}

impl CorpusReport {
    /// Aggregates results given in any order; the report is sorted by index.
    pub fn from_results(items: &[(usize, bool, PipelineResult)]) -> Result<Self, PipelineError> {
        if items.is_empty() {
            return Err(PipelineError::EmptyCorpus);
        }
        let mut images = Vec::with_capacity(items.len());
        let mut gate = Confusion::default();
        let mut regions = Confusion::default();
        for (index, has_crack, r) in items {
            let truth = r.truth.as_ref();
            gate.record(r.gate, if *has_crack { 1 } else { -1 });
            for d in &r.regions {
                if let Some(t) = d.truth {
                    regions.record(d.label, t);
                }
            }
            images.push(ImageMetrics {
                index: *index,
                name: format!("image_{index:03}"),
                has_crack: *has_crack,
                gate: r.gate,
                iou: r.iou.unwrap_or(f64::NAN),
                predicted_pixels: r.mask.count(),
                truth_pixels: truth.map_or(0, Mask::count),
                regions: r.regions.len(),
                crack_regions: r.regions.iter().filter(|d| d.label == 1).count(),
                false_positive_regions: r.regions.iter().filter(|d| d.label == 1 && d.truth == Some(-1)).count(),
                demoted_regions: r.regions.iter().filter(|d| d.demoted).count(),
            });
        }
        images.sort_by_key(|m| m.index);
        let mean = |it: &mut dyn Iterator<Item = f64>| {
            let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
            if n == 0 {
                f64::NAN
            } else {
                s / n as f64
            }
        };
        let scored = || images.iter().filter(|m| !m.iou.is_nan());
        Ok(Self {
            mean_iou: mean(&mut scored().map(|m| m.iou)),
            mean_iou_cracks: mean(&mut scored().filter(|m| m.truth_pixels > 0).map(|m| m.iou)),
            false_positive_regions: images.iter().map(|m| m.false_positive_regions).sum(),
            demoted_regions: images.iter().map(|m| m.demoted_regions).sum(),
            images,
            gate,
            regions,
        })
    }
}

/// Sequential corpus evaluation; image `i` runs with seed
/// `derive_seed(cfg.seed, [i])`, so any evaluation order gives the same
/// report.
pub fn evaluate_corpus(
    samples: &[Sample],
    gate: &Classifier,
    segment: &Classifier,
    cfg: &PipelineConfig,
    clock: &dyn Clock,
) -> Result<CorpusReport, PipelineError> {
    let mut items = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let r = run_pipeline(&s.image, gate, segment, &per_image_config(cfg, i), Some(&s.mask), clock)?;
        items.push((i, s.has_crack, r));
    }
    CorpusReport::from_results(&items)
}

/// Config with the seed of image `index`.
pub fn per_image_config(cfg: &PipelineConfig, index: usize) -> PipelineConfig {
    PipelineConfig {
        seed: derive_seed(cfg.seed, &[index as u64]),
        ..cfg.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn decision(aspect: f64, classified: i8) -> RegionDecision {
        RegionDecision {
            pixels: vec![(0, 0)],
            bbox: OrientedBox {
                center: (0.5, 0.5),
                length: 1.0,
                breadth: 1.0,
                angle: 0.0,
            },
            aspect_ratio: aspect,
            score: 0.0,
            classified,
            label: classified,
            demoted: false,
            truth: None,
        }
    }

    #[test]
    fn postfilter_examples() {
        let mut rs = vec![decision(1.05, 1), decision(8.0, 1), decision(1.0, -1)];
        assert_eq!(postfilter_regions(&mut rs, 2.5), 1);
        assert_eq!(rs[0].label, -1);
        assert!(rs[0].demoted);
        assert_eq!(rs[1].label, 1);
        assert!(!rs[2].demoted);

        let mut rs = vec![decision(1.05, 1)];
        assert_eq!(postfilter_regions(&mut rs, 0.0), 0);
        assert_eq!(rs[0].label, 1);
    }

    #[test]
    fn region_truth_majority() {
        let mut t = Mask::empty(4, 1);
        t.set(0, 0, true);
        assert_eq!(region_truth(&[(0, 0), (1, 0)], &t), 1);
        assert_eq!(region_truth(&[(0, 0), (1, 0), (2, 0)], &t), -1);
    }

    #[test]
    fn corpus_generation_is_seeded() {
        let spec = CorpusSpec {
            images: 4,
            crack_fraction: 0.5,
            ..CorpusSpec::default()
        };
        let a = generate_corpus(&spec);
        assert_eq!(a, generate_corpus(&spec));
        assert_eq!(a.iter().filter(|s| s.has_crack).count(), 2);
        assert!(a.iter().all(|s| s.has_crack != s.mask.is_empty()));
    }

    #[test]
    fn report_aggregation() {
        let mut perfect = Mask::empty(2, 2);
        perfect.set(0, 0, true);
        let r = PipelineResult {
            gate: 1,
            gate_score: 0.3,
            early_exit: false,
            clusters: None,
            no_contrast: false,
            candidates: perfect.clone(),
            regions: vec![],
            mask: perfect.clone(),
            truth: Some(perfect.clone()),
            iou: Some(1.0),
            timings: StageTimes::default(),
        };
        let rep = CorpusReport::from_results(&[(0, true, r.clone())]).unwrap();
        assert_eq!(rep.mean_iou, 1.0);
        assert_eq!(rep.gate.tp, 1);

        let mut miss = r;
        miss.mask = Mask::empty(2, 2);
        miss.iou = Some(0.0);
        let rep = CorpusReport::from_results(&[(0, true, miss)]).unwrap();
        assert_eq!(rep.mean_iou_cracks, 0.0);
        assert_eq!(CorpusReport::from_results(&[]), Err(PipelineError::EmptyCorpus));
    }
}
