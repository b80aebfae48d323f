//! Image corpora on disk and parallel evaluation.
//!
//! A corpus directory holds `images/<name>.png` and a mask with the same
//! file stem in `masks/`. PGM and PPM images are read as well. Images are
//! processed in file-name order, and that order fixes the per-image seeds.

use std::path::{Path, PathBuf};
use std::time::Instant;

use qseg_core::features::FeatureMatrix;
use qseg_core::pipeline::{
    per_image_config, run_pipeline, sample_region_features, Classifier, Clock, CorpusReport, PipelineConfig,
    PipelineResult, Sample, StageTimes,
};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::{read_color, read_mask};

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "pgm", "ppm"];

#[derive(Debug, Clone, PartialEq)]
pub struct NamedSample {
    pub name: String,
    pub sample: Sample,
}

/// Wall-clock milliseconds since construction.
#[derive(Debug, Clone, Copy)]
pub struct SystemClock(Instant);

impl SystemClock {
    pub fn new() -> Self {
        Self(Instant::now())
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now_ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

fn has_image_extension(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn find_mask(masks: &Path, stem: &str) -> Option<PathBuf> {
    IMAGE_EXTENSIONS
        .iter()
        .map(|ext| masks.join(format!("{stem}.{ext}")))
        .find(|p| p.is_file())
}

/// Image paths of a corpus directory, sorted by file name.
pub fn corpus_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let images = dir.join("images");
    let entries = std::fs::read_dir(&images).map_err(|e| Error::io(&images, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let p = entry.map_err(|e| Error::io(&images, e))?.path();
        if p.is_file() && has_image_extension(&p) {
            paths.push(p);
        }
    }
    if paths.is_empty() {
        return Err(Error::EmptyCorpus(dir.to_path_buf()));
    }
    paths.sort();
    Ok(paths)
}

/// Loads every image with its mask; an image counts as cracked when its
/// mask has any pixel set.
pub fn load_corpus(dir: &Path) -> Result<Vec<NamedSample>> {
    let masks = dir.join("masks");
    corpus_images(dir)?
        .into_iter()
        .map(|p| {
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let mask_path = find_mask(&masks, &stem).ok_or_else(|| Error::MissingMask(p.clone()))?;
            let image = read_color(&p)?;
            let mask = read_mask(&mask_path)?;
            if (mask.width(), mask.height()) != (image.width, image.height) {
                return Err(Error::Data(format!(
                    "{}: mask is {}x{} but the image is {}x{}",
                    mask_path.display(),
                    mask.width(),
                    mask.height(),
                    image.width,
                    image.height
                )));
            }
            Ok(NamedSample {
                name: stem,
                sample: Sample {
                    has_crack: !mask.is_empty(),
                    image,
                    mask,
                },
            })
        })
        .collect()
}

/// Runs `f` on a pool of `jobs` threads; 0 uses one per core.
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(f),
        Err(e) => {
            log::warn!("cannot build a {jobs}-thread pool ({e}), using the global one");
            f()
        }
    }
}

/// Pipeline output of one corpus image.
#[derive(Debug, Clone)]
pub struct Evaluated {
    pub name: String,
    pub result: PipelineResult,
}

/// Runs the pipeline on every image in parallel. Image `i` uses
/// `per_image_config(cfg, i)`, so the report matches the sequential one.
pub fn evaluate(
    samples: &[NamedSample],
    gate: &Classifier,
    segment: &Classifier,
    cfg: &PipelineConfig,
    jobs: usize,
) -> Result<(CorpusReport, Vec<Evaluated>)> {
    let results: Vec<PipelineResult> = with_jobs(jobs, || {
        samples
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let clock = SystemClock::new();
                let r = run_pipeline(
                    &s.sample.image,
                    gate,
                    segment,
                    &per_image_config(cfg, i),
                    Some(&s.sample.mask),
                    &clock,
                );
                r.map_err(Error::from)
            })
            .collect::<Result<_>>()
    })?;
    let items: Vec<_> = results
        .iter()
        .enumerate()
        .map(|(i, r)| (i, samples[i].sample.has_crack, r.clone()))
        .collect();
    let mut report = CorpusReport::from_results(&items)?;
    for m in &mut report.images {
        m.name = samples[m.index].name.clone();
    }
    let evaluated = samples
        .iter()
        .zip(results)
        .map(|(s, result)| Evaluated {
            name: s.name.clone(),
            result,
        })
        .collect();
    Ok((report, evaluated))
}

/// Stage timings of an evaluation, in image order.
pub fn timings(evaluated: &[Evaluated]) -> Vec<(String, StageTimes)> {
    evaluated.iter().map(|e| (e.name.clone(), e.result.timings)).collect()
}

/// Region descriptors of a corpus, computed in parallel with the same
/// per-image seeds as `qseg_core::pipeline::region_features`.
pub fn region_features(samples: &[Sample], cfg: &PipelineConfig, jobs: usize) -> Result<FeatureMatrix> {
    let parts: Vec<(Vec<Vec<f64>>, Vec<i8>)> = with_jobs(jobs, || {
        samples
            .par_iter()
            .enumerate()
            .map(|(i, s)| sample_region_features(s, i, cfg).map_err(Error::from))
            .collect::<Result<_>>()
    })?;
    let (rows, labels): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
    let rows: Vec<Vec<f64>> = rows.into_iter().flatten().collect();
    let labels: Vec<i8> = labels.into_iter().flatten().collect();
    Ok(FeatureMatrix::from_rows(&rows, Some(labels))?)
}
