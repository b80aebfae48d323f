use std::path::Path;

use qseg_core::baseline::AdamConfig;
use qseg_core::clustering::{quantize, segment_image, ClusterConfig, ClusterState};
use qseg_core::descriptors::image_descriptor;
use qseg_core::features::{generate_synthetic_features, FeatureMatrix, SplitConfig, SyntheticSpec};
use qseg_core::imaging::{overlay, to_grayscale, ColorImage, GrayImage, OrientedBox, SceneConfig};
use qseg_core::optim::{OptimizerConfig, Termination};
use qseg_core::pipeline::{
    generate_corpus, image_features, preprocess, preprocess_gray, run_pipeline, run_segmentation, train_classifier,
    Classifier, ClassifierSpec, Clock, CorpusSpec, ModelKind, PipelineConfig, PipelineResult, PreprocessConfig,
    StageTimes, TrainingLog, TrainingMetadata,
};
use qseg_core::protocols::{distance_error_study, Protocol, StudyConfig};
use qseg_core::rng::derive_seed;
use qseg_core::vqc::{Confusion, Execution, TrainConfig};
use rayon::prelude::*;
use serde::Serialize;

use super::args::*;
use crate::corpus::{self, with_jobs, SystemClock};
use crate::error::{Error, Result};
use crate::model_file;
use crate::output::Outputs;
use crate::plot::{line_chart, Axes, Series, PALETTE};
use crate::raster::{color_png, gray_png, mask_png, read_color, read_mask};
use crate::tabular::{load_features, write_features};

const DEFAULT_SHOTS: u64 = 1000;
const DEFAULT_SHOT_GRID: [u64; 4] = [10, 100, 1000, 10000];

pub fn execute(cli: &Cli, out: &mut Outputs) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::SynthGen(a) => synth_gen(g, a, out),
        Command::TrainImageClf(a) => train_image(g, a, out),
        Command::TrainSegmentClf(a) => train_segment(g, a, out),
        Command::Classify(a) => classify(g, a, out),
        Command::Qmeans(a) => qmeans(g, a, out),
        Command::Segment(a) => segment(g, a, out),
        Command::PipelineRun(a) => pipeline_run(g, a, out),
        Command::Evaluate(a) => evaluate(g, a, out),
        Command::BenchDistance(a) => bench_distance(g, a, out),
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

fn parse_shot_list(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| usage(format!("--shots: `{t}` is not a shot count")))
        })
        .collect()
}

fn single_shots(g: &GlobalArgs) -> Result<u64> {
    match &g.shots {
        None => Ok(DEFAULT_SHOTS),
        Some(s) => match parse_shot_list(s)?.as_slice() {
            [one] => Ok(*one),
            _ => Err(usage("--shots takes a single value for this command")),
        },
    }
}

fn check(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(usage(msg))
    }
}

fn fraction(v: f64, flag: &str) -> Result<()> {
    check((0.0..1.0).contains(&v), &format!("{flag} must lie in [0, 1)"))
}

fn preprocess_config(a: &PreprocessArgs) -> Result<PreprocessConfig> {
    check(a.width > 0 && a.height > 0, "--width and --height must be positive")?;
    check(a.sigma.is_finite() && a.sigma > 0.0, "--sigma must be positive")?;
    Ok(PreprocessConfig {
        width: a.width,
        height: a.height,
        sigma: a.sigma,
    })
}

fn cluster_config(a: &ClusterArgs, shots: u64) -> Result<ClusterConfig> {
    check(a.k > 0, "--k must be at least 1")?;
    check(a.batch_qubits > 0, "--batch-qubits must be at least 1")?;
    check(a.cluster_iters > 0, "--cluster-iters must be at least 1")?;
    check(a.tol.is_finite() && a.tol >= 0.0, "--tol must be non-negative")?;
    Ok(ClusterConfig {
        k: a.k,
        max_iters: a.cluster_iters,
        tol: a.tol,
        shots,
        batch_qubits: a.batch_qubits,
        seed: 0,
        init: a.init,
        protocol: a.protocol,
    })
}

fn pipeline_config(
    g: &GlobalArgs,
    pre: &PreprocessArgs,
    cluster: &ClusterArgs,
    regions: &RegionArgs,
    filter: Option<&FilterArgs>,
) -> Result<PipelineConfig> {
    let shots = single_shots(g)?;
    let aspect_threshold = filter.map_or(0.0, |f| f.aspect_threshold);
    check(aspect_threshold.is_finite(), "--aspect-threshold must be finite")?;
    Ok(PipelineConfig {
        preprocess: preprocess_config(pre)?,
        cluster: cluster_config(cluster, shots)?,
        method: cluster.method,
        aspect_threshold,
        connectivity: regions.connectivity,
        min_region_size: regions.min_region_size,
        classifier_shots: shots,
        seed: g.seed,
    })
}

fn classifier_spec(g: &GlobalArgs, t: &TrainArgs) -> Result<ClassifierSpec> {
    check(t.qubits > 0 && t.layers > 0, "--qubits and --layers must be positive")?;
    check(
        t.max_iters > 0 && t.repeats > 0,
        "--max-iters and --repeats must be positive",
    )?;
    check(
        t.rho_end > 0.0 && t.rho_end < t.rho_begin && t.rho_begin.is_finite(),
        "need 0 < --rho-end < --rho-begin",
    )?;
    check(t.epochs > 0, "--epochs must be positive")?;
    check(
        t.learning_rate.is_finite() && t.learning_rate > 0.0,
        "--learning-rate must be positive",
    )?;
    fraction(t.test_fraction, "--test-fraction")?;
    fraction(t.val_fraction, "--val-fraction")?;
    if let Some(p) = t.positive_fraction {
        check(p > 0.0 && p < 1.0, "--positive-fraction must lie in (0, 1)")?;
    }
    Ok(ClassifierSpec {
        backend: t.backend,
        ansatz: t.ansatz,
        qubits: t.qubits,
        layers: t.layers,
        encoder: t.encoder,
        split: SplitConfig {
            test_fraction: t.test_fraction,
            val_fraction: t.val_fraction,
            positive_fraction: t.positive_fraction,
            total: t.total,
        },
        train: TrainConfig {
            optimizer: OptimizerConfig {
                algorithm: t.optimizer,
                max_iters: t.max_iters,
                rho_begin: t.rho_begin,
                rho_end: t.rho_end,
                repeats: t.repeats,
                seed: g.seed,
            },
            exec: Execution {
                shots: single_shots(g)?,
                seed: g.seed,
            },
        },
        baseline: AdamConfig {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            ..AdamConfig::default()
        },
        seed: g.seed,
    })
}

fn load_model(path: &Path, flag: &str, expected: ModelKind) -> Result<Classifier> {
    let c = model_file::load(path)?;
    if c.kind != expected {
        return Err(usage(format!(
            "{flag}: {} holds a {} model, expected {expected}",
            path.display(),
            c.kind
        )));
    }
    Ok(c)
}

fn scene_config(a: &SynthGenArgs) -> SceneConfig {
    let base = match a.scene {
        Scene::Default => SceneConfig::default(),
        Scene::SquareBlobs => SceneConfig::square_blobs(),
    };
    SceneConfig {
        width: a.image_width,
        height: a.image_height,
        ..base
    }
}

#[derive(Serialize)]
struct CorpusEntry {
    name: String,
    has_crack: bool,
    crack_pixels: usize,
}

#[derive(Serialize)]
struct CorpusIndex<'a> {
    spec: &'a CorpusSpec,
    images: Vec<CorpusEntry>,
}

fn synth_gen(g: &GlobalArgs, a: &SynthGenArgs, out: &mut Outputs) -> Result<()> {
    match a.kind {
        SynthKind::Images => {
            check(a.count > 0, "--count must be positive")?;
            check(
                (0.0..=1.0).contains(&a.crack_fraction),
                "--crack-fraction must lie in [0, 1]",
            )?;
            check(a.image_width >= 8 && a.image_height >= 8, "images must be at least 8x8")?;
            let spec = CorpusSpec {
                images: a.count,
                crack_fraction: a.crack_fraction,
                scene: scene_config(a),
                seed: g.seed,
            };
            let samples = generate_corpus(&spec);
            let mut entries = Vec::with_capacity(samples.len());
            for (i, s) in samples.iter().enumerate() {
                let name = format!("img_{i:04}");
                out.write(&format!("images/{name}.png"), &color_png(&s.image)?)?;
                out.write(&format!("masks/{name}.png"), &mask_png(&s.mask)?)?;
                entries.push(CorpusEntry {
                    name,
                    has_crack: s.has_crack,
                    crack_pixels: s.mask.count(),
                });
            }
            out.json(
                "corpus.json",
                &CorpusIndex {
                    spec: &spec,
                    images: entries,
                },
            )?;
            println!("wrote {} images to {}", samples.len(), out.dir().display());
        }
        SynthKind::Features => {
            check(a.rows > 0 && a.dims > 0, "--rows and --dims must be positive")?;
            check(
                (0.0..=1.0).contains(&a.positive_fraction),
                "--positive-fraction must lie in [0, 1]",
            )?;
            check(
                a.separation.is_finite() && a.separation >= 0.0,
                "--separation must be non-negative",
            )?;
            let spec = SyntheticSpec {
                rows: a.rows,
                dims: a.dims,
                positive_fraction: a.positive_fraction,
                separation: a.separation,
                sigma: 1.0,
            };
            let m = generate_synthetic_features(&spec, g.seed)?;
            let mut buf = Vec::new();
            write_features(&m, &mut buf)?;
            out.write("features.csv", &buf)?;
            println!("wrote {} rows with {} features", m.rows(), m.cols());
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct LossRow {
    iteration: usize,
    train_loss: f64,
    best_train_loss: f64,
    val_loss: f64,
}

#[derive(Serialize)]
struct TrainingSummary<'a> {
    kind: ModelKind,
    rows: usize,
    positives: usize,
    spec: &'a ClassifierSpec,
    metadata: &'a TrainingMetadata,
    test: Confusion,
    report: &'a TrainingLog,
}

#[derive(Serialize)]
struct TrainTimings {
    train_ms: f64,
}

fn train_and_write(
    kind: ModelKind,
    data: &FeatureMatrix,
    spec: &ClassifierSpec,
    plots: bool,
    out: &mut Outputs,
) -> Result<()> {
    let clock = SystemClock::new();
    let trained = train_classifier(kind, data, spec)?;
    let train_ms = clock.now_ms();
    if let TrainingLog::Quantum(r) = &trained.report {
        if r.termination == Termination::NonFiniteStart {
            return Err(Error::Numerical(
                "training loss is not finite at the initial parameters".into(),
            ));
        }
    }
    let meta = &trained.classifier.metadata;
    if !meta.final_train_loss.is_finite() {
        return Err(Error::Numerical("training ended with a non-finite loss".into()));
    }
    out.write("model.json", &model_file::to_bytes(&trained.classifier)?)?;

    let train = trained.report.train_loss();
    let val = trained.report.val_loss();
    let mut best = f64::INFINITY;
    let rows: Vec<LossRow> = train
        .iter()
        .zip(val)
        .enumerate()
        .map(|(i, (&t, &v))| {
            best = best.min(t);
            LossRow {
                iteration: i + 1,
                train_loss: t,
                best_train_loss: best,
                val_loss: v,
            }
        })
        .collect();
    if plots {
        let series = |f: fn(&LossRow) -> f64, color| Series {
            points: rows.iter().map(|r| (r.iteration as f64, f(r))).collect(),
            color,
        };
        let chart = line_chart(
            &[
                series(|r| r.best_train_loss, PALETTE[0]),
                series(|r| r.val_loss, PALETTE[1]),
            ],
            Axes::default(),
        );
        out.write("loss.png", &color_png(&chart)?)?;
    }
    out.csv("loss.csv", rows)?;
    out.json(
        "training.json",
        &TrainingSummary {
            kind,
            rows: data.rows(),
            positives: data.positives(),
            spec,
            metadata: meta,
            test: trained.test,
            report: &trained.report,
        },
    )?;
    out.json("timings.json", &TrainTimings { train_ms })?;
    println!(
        "{kind} model: {} training rows, train accuracy {:.3}, validation {:.3}, test {:.3}",
        meta.train_rows, meta.train_accuracy, meta.val_accuracy, meta.test_accuracy
    );
    Ok(())
}

fn train_image(g: &GlobalArgs, a: &TrainImageArgs, out: &mut Outputs) -> Result<()> {
    let spec = classifier_spec(g, &a.train)?;
    let pre = preprocess_config(&a.preprocess)?;
    let (kind, data) = match (&a.corpus, &a.features) {
        (Some(dir), None) => {
            let samples: Vec<_> = corpus::load_corpus(dir)?.into_iter().map(|s| s.sample).collect();
            (ModelKind::ImageGate, image_features(&samples, &pre)?)
        }
        (None, Some(csv)) => (ModelKind::Tabular, load_features(csv)?),
        _ => return Err(usage("give exactly one of --corpus and --features")),
    };
    train_and_write(kind, &data, &spec, g.plots, out)
}

fn train_segment(g: &GlobalArgs, a: &TrainSegmentArgs, out: &mut Outputs) -> Result<()> {
    let spec = classifier_spec(g, &a.train)?;
    let cfg = pipeline_config(g, &a.preprocess, &a.cluster, &a.regions, None)?;
    let samples: Vec<_> = corpus::load_corpus(&a.corpus)?.into_iter().map(|s| s.sample).collect();
    let data = corpus::region_features(&samples, &cfg, g.jobs)?;
    train_and_write(ModelKind::SegmentFilter, &data, &spec, g.plots, out)
}

#[derive(Serialize)]
struct Prediction {
    id: String,
    score: f64,
    label: i8,
    truth: Option<i8>,
}

#[derive(Serialize)]
struct ClassifyMetrics {
    kind: ModelKind,
    rows: usize,
    predicted_positive: usize,
    confusion: Option<Confusion>,
    accuracy: Option<f64>,
    precision: Option<f64>,
    recall: Option<f64>,
    f1: Option<f64>,
}

fn classify(g: &GlobalArgs, a: &ClassifyArgs, out: &mut Outputs) -> Result<()> {
    let shots = single_shots(g)?;
    let pre = preprocess_config(&a.preprocess)?;
    let model = model_file::load(&a.model)?;
    let rows: Vec<(String, Vec<f64>, Option<i8>)> = match (&a.features, &a.input, &a.corpus) {
        (Some(csv), None, None) => {
            let m = load_features(csv)?;
            (0..m.rows())
                .map(|i| (i.to_string(), m.row(i).to_vec(), m.label(i)))
                .collect()
        }
        (None, Some(_), None) | (None, None, Some(_)) => {
            if model.kind != ModelKind::ImageGate {
                return Err(usage(format!(
                    "images can only be scored by an image-gate model, not {}",
                    model.kind
                )));
            }
            if let Some(p) = &a.input {
                let name = p
                    .file_stem()
                    .map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
                vec![(name, image_descriptor(&preprocess(&read_color(p)?, &pre)?), None)]
            } else {
                let samples = corpus::load_corpus(a.corpus.as_deref().expect("matched above"))?;
                samples
                    .iter()
                    .map(|s| {
                        let d = image_descriptor(&preprocess(&s.sample.image, &pre)?);
                        Ok((s.name.clone(), d, Some(if s.sample.has_crack { 1 } else { -1 })))
                    })
                    .collect::<Result<_>>()?
            }
        }
        _ => return Err(usage("give exactly one of --features, --input and --corpus")),
    };
    let mut preds = Vec::with_capacity(rows.len());
    let mut confusion = Confusion::default();
    let mut labelled = false;
    for (i, (id, x, truth)) in rows.into_iter().enumerate() {
        let exec = Execution {
            shots,
            seed: derive_seed(g.seed, &[i as u64]),
        };
        let score = model.score(&x, exec)?;
        let label = if score >= 0.0 { 1 } else { -1 };
        if let Some(t) = truth {
            confusion.record(label, t);
            labelled = true;
        }
        preds.push(Prediction {
            id,
            score,
            label,
            truth,
        });
    }
    let c = labelled.then_some(confusion);
    let metrics = ClassifyMetrics {
        kind: model.kind,
        rows: preds.len(),
        predicted_positive: preds.iter().filter(|p| p.label == 1).count(),
        confusion: c,
        accuracy: c.map(|c| c.accuracy()),
        precision: c.map(|c| c.precision()),
        recall: c.map(|c| c.recall()),
        f1: c.map(|c| c.f1()),
    };
    out.csv("predictions.csv", &preds)?;
    out.json("metrics.json", &metrics)?;
    match metrics.accuracy {
        Some(acc) => println!("{} rows, accuracy {acc:.3}", metrics.rows),
        None => println!(
            "{} rows, {} predicted positive",
            metrics.rows, metrics.predicted_positive
        ),
    }
    Ok(())
}

#[derive(Serialize)]
struct ClusterSummary<'a> {
    width: usize,
    height: usize,
    config: &'a ClusterConfig,
    centroids: &'a [f64],
    cluster_sizes: Vec<usize>,
    dark_cluster: usize,
    no_contrast: bool,
    iterations: usize,
    converged: bool,
    reseeded: usize,
    history: &'a [Vec<f64>],
}

/// Every pixel painted with the 8-bit level of its cluster's centroid.
fn posterize(img: &GrayImage, state: &ClusterState) -> GrayImage {
    let levels: Vec<u8> = state.centroids.iter().map(|&c| quantize(c)).collect();
    let data = state.assignments.iter().map(|&a| levels[a]).collect();
    GrayImage::from_raw(img.width(), img.height(), data).expect("one assignment per pixel")
}

fn qmeans(g: &GlobalArgs, a: &QmeansArgs, out: &mut Outputs) -> Result<()> {
    let cfg = ClusterConfig {
        seed: derive_seed(g.seed, &[2]),
        ..cluster_config(&a.cluster, single_shots(g)?)?
    };
    let pre = preprocess_config(&a.preprocess)?;
    let gray = to_grayscale(&read_color(&a.input)?)?;
    let img = if a.raw { gray } else { preprocess_gray(&gray, &pre)? };
    let seg = segment_image(&img, &cfg, a.cluster.method)?;
    out.write("mask.png", &mask_png(&seg.candidates)?)?;
    out.write("labels.png", &gray_png(&posterize(&img, &seg.state))?)?;
    if g.plots {
        let series: Vec<Series> = (0..seg.state.centroids.len())
            .map(|j| Series {
                points: seg
                    .state
                    .history
                    .iter()
                    .enumerate()
                    .map(|(t, c)| (t as f64, c[j]))
                    .collect(),
                color: PALETTE[j % PALETTE.len()],
            })
            .collect();
        out.write("centroids.png", &color_png(&line_chart(&series, Axes::default()))?)?;
    }
    out.json(
        "clusters.json",
        &ClusterSummary {
            width: img.width(),
            height: img.height(),
            config: &cfg,
            centroids: &seg.state.centroids,
            cluster_sizes: seg.state.cluster_sizes(),
            dark_cluster: seg.dark_cluster,
            no_contrast: seg.no_contrast,
            iterations: seg.state.iterations,
            converged: seg.state.converged,
            reseeded: seg.state.reseeded,
            history: &seg.state.history,
        },
    )?;
    println!(
        "{} clusters after {} iterations, {} crack-candidate pixels",
        seg.state.centroids.len(),
        seg.state.iterations,
        seg.candidates.count()
    );
    Ok(())
}

#[derive(Serialize)]
struct RegionSummary {
    pixels: usize,
    bbox: OrientedBox,
    aspect_ratio: f64,
    score: f64,
    classified: i8,
    label: i8,
    demoted: bool,
    truth: Option<i8>,
}

/// Deterministic part of a [`PipelineResult`]; masks go to PNG files and
/// timings to `timings.json`.
#[derive(Serialize)]
struct RunSummary<'a> {
    input: String,
    width: usize,
    height: usize,
    gate: i8,
    gate_score: f64,
    early_exit: bool,
    no_contrast: bool,
    centroids: Option<&'a [f64]>,
    cluster_iterations: Option<usize>,
    candidate_pixels: usize,
    mask_pixels: usize,
    demoted_regions: usize,
    regions: Vec<RegionSummary>,
    iou: Option<f64>,
}

fn write_single(
    input: &Path,
    image: &ColorImage,
    cfg: &PipelineConfig,
    r: &PipelineResult,
    out: &mut Outputs,
) -> Result<()> {
    let img = preprocess(image, &cfg.preprocess)?;
    out.write("mask.png", &mask_png(&r.mask)?)?;
    out.write("candidates.png", &mask_png(&r.candidates)?)?;
    out.write("overlay.png", &color_png(&overlay(&img, &r.mask)?)?)?;
    let summary = RunSummary {
        input: input.display().to_string(),
        width: img.width(),
        height: img.height(),
        gate: r.gate,
        gate_score: r.gate_score,
        early_exit: r.early_exit,
        no_contrast: r.no_contrast,
        centroids: r.clusters.as_ref().map(|c| c.centroids.as_slice()),
        cluster_iterations: r.clusters.as_ref().map(|c| c.iterations),
        candidate_pixels: r.candidates.count(),
        mask_pixels: r.mask.count(),
        demoted_regions: r.regions.iter().filter(|d| d.demoted).count(),
        regions: r
            .regions
            .iter()
            .map(|d| RegionSummary {
                pixels: d.pixels.len(),
                bbox: d.bbox,
                aspect_ratio: d.aspect_ratio,
                score: d.score,
                classified: d.classified,
                label: d.label,
                demoted: d.demoted,
                truth: d.truth,
            })
            .collect(),
        iou: r.iou,
    };
    out.json("result.json", &summary)?;
    out.json("timings.json", &r.timings)?;
    if r.early_exit {
        println!("gate rejected the image (score {:.3}); no segmentation", r.gate_score);
    } else {
        let iou = r.iou.map_or_else(String::new, |v| format!(", IoU {v:.3}"));
        let n = r.regions.iter().filter(|d| d.label == 1).count();
        let noun = if n == 1 { "region" } else { "regions" };
        println!("{} crack pixels in {n} {noun}{iou}", r.mask.count());
    }
    Ok(())
}

fn segment(g: &GlobalArgs, a: &SegmentArgs, out: &mut Outputs) -> Result<()> {
    let cfg = pipeline_config(g, &a.preprocess, &a.cluster, &a.regions, Some(&a.filter))?;
    let seg = load_model(&a.segment_model, "--segment-model", ModelKind::SegmentFilter)?;
    let image = read_color(&a.input)?;
    let truth = a.mask.as_deref().map(read_mask).transpose()?;
    let r = run_segmentation(&image, &seg, &cfg, truth.as_ref(), &SystemClock::new())?;
    write_single(&a.input, &image, &cfg, &r, out)
}

fn pipeline_run(g: &GlobalArgs, a: &PipelineRunArgs, out: &mut Outputs) -> Result<()> {
    let cfg = pipeline_config(g, &a.preprocess, &a.cluster, &a.regions, Some(&a.filter))?;
    let gate = load_model(&a.gate_model, "--gate-model", ModelKind::ImageGate)?;
    let seg = load_model(&a.segment_model, "--segment-model", ModelKind::SegmentFilter)?;
    let image = read_color(&a.input)?;
    let truth = a.mask.as_deref().map(read_mask).transpose()?;
    let r = run_pipeline(&image, &gate, &seg, &cfg, truth.as_ref(), &SystemClock::new())?;
    write_single(&a.input, &image, &cfg, &r, out)
}

#[derive(Serialize)]
struct TimingRow {
    name: String,
    preprocess_ms: f64,
    gate_ms: f64,
    segmentation_ms: f64,
    regions_ms: f64,
    classification_ms: f64,
    total_ms: f64,
}

impl TimingRow {
    fn new(name: String, t: StageTimes) -> Self {
        Self {
            name,
            preprocess_ms: t.preprocess_ms,
            gate_ms: t.gate_ms,
            segmentation_ms: t.segmentation_ms,
            regions_ms: t.regions_ms,
            classification_ms: t.classification_ms,
            total_ms: t.total_ms,
        }
    }
}

fn evaluate(g: &GlobalArgs, a: &EvaluateArgs, out: &mut Outputs) -> Result<()> {
    let cfg = pipeline_config(g, &a.preprocess, &a.cluster, &a.regions, Some(&a.filter))?;
    let gate = load_model(&a.gate_model, "--gate-model", ModelKind::ImageGate)?;
    let seg = load_model(&a.segment_model, "--segment-model", ModelKind::SegmentFilter)?;
    let samples = corpus::load_corpus(&a.corpus)?;
    let (report, evaluated) = corpus::evaluate(&samples, &gate, &seg, &cfg, g.jobs)?;
    if a.save_masks {
        for e in &evaluated {
            out.write(&format!("masks/{}.png", e.name), &mask_png(&e.result.mask)?)?;
        }
    }
    out.json("metrics.json", &report)?;
    out.csv("per_image.csv", &report.images)?;
    out.csv(
        "timings.csv",
        corpus::timings(&evaluated)
            .into_iter()
            .map(|(name, times)| TimingRow::new(name, times)),
    )?;
    println!(
        "{} images: mean IoU {:.3} (cracked images {:.3}), gate recall {:.3}, {} false-positive regions",
        report.images.len(),
        report.mean_iou,
        report.mean_iou_cracks,
        report.gate.recall(),
        report.false_positive_regions
    );
    Ok(())
}

#[derive(Serialize)]
struct BenchRow {
    protocol: &'static str,
    shots: u64,
    c: u8,
    mean_abs_err: f64,
    std_err_abs: f64,
    seed_count: u64,
}

fn bench_distance(g: &GlobalArgs, a: &BenchArgs, out: &mut Outputs) -> Result<()> {
    let shots = match &g.shots {
        Some(s) => parse_shot_list(s)?,
        None => DEFAULT_SHOT_GRID.to_vec(),
    };
    check(a.seeds > 0, "--seeds must be positive")?;
    check(
        !a.c.is_empty() && !a.protocol.is_empty(),
        "--c and --protocol need at least one value",
    )?;
    let p_values: Vec<u8> = if a.p.is_empty() {
        (0..=255).collect()
    } else {
        a.p.clone()
    };
    let cells: Vec<(Protocol, u64)> = a
        .protocol
        .iter()
        .flat_map(|&p| shots.iter().map(move |&s| (p, s)))
        .collect();
    // Seeds depend on (seed index, shots, c, p) only, so cells can run in
    // any order.
    let parts: Vec<Vec<BenchRow>> = with_jobs(g.jobs, || {
        cells
            .par_iter()
            .map(|&(protocol, s)| {
                let cfg = StudyConfig {
                    protocol,
                    shot_grid: vec![s],
                    p_values: p_values.clone(),
                    c_values: a.c.clone(),
                    seeds: a.seeds,
                    base_seed: g.seed,
                    estimator: a.estimator,
                };
                Ok(distance_error_study(&cfg)?
                    .into_iter()
                    .map(|r| BenchRow {
                        protocol: protocol.name(),
                        shots: r.shots,
                        c: r.c,
                        mean_abs_err: r.mean_abs_err,
                        std_err_abs: r.std_err_abs,
                        seed_count: r.seed_count,
                    })
                    .collect())
            })
            .collect::<Result<_>>()
    })?;
    let rows: Vec<BenchRow> = parts.into_iter().flatten().collect();
    if g.plots {
        let mut series = Vec::new();
        for (i, (&protocol, &c)) in a
            .protocol
            .iter()
            .flat_map(|p| a.c.iter().map(move |c| (p, c)))
            .enumerate()
        {
            series.push(Series {
                points: rows
                    .iter()
                    .filter(|r| r.protocol == protocol.name() && r.c == c)
                    .map(|r| (r.shots as f64, r.mean_abs_err))
                    .collect(),
                color: PALETTE[i % PALETTE.len()],
            });
        }
        let axes = Axes {
            log_x: true,
            log_y: true,
            ..Axes::default()
        };
        out.write("distance_error.png", &color_png(&line_chart(&series, axes))?)?;
    }
    for &protocol in &a.protocol {
        let summary: Vec<String> = shots
            .iter()
            .map(|&s| {
                let errs: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.protocol == protocol.name() && r.shots == s)
                    .map(|r| r.mean_abs_err)
                    .collect();
                format!("{s}: {:.5}", errs.iter().sum::<f64>() / errs.len() as f64)
            })
            .collect();
        println!(
            "{} mean |error| by shots ({}): {}",
            protocol.name(),
            a.estimator.name(),
            summary.join(", ")
        );
    }
    out.csv("distance_error.csv", rows)?;
    Ok(())
}
