//! Intensity clustering: classical k-means and q-means, where the
//! pixel-to-centroid distance comes from a similarity circuit.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{GrayImage, Mask};
use crate::protocols::{Encoder, Protocol, ProtocolError};
use crate::qsim::{sample_frequency, Circuit, QubitCount, SimError};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error("no pixels to cluster")]
    Empty,
    #[error("k must be at least 1, got {0}")]
    BadK(usize),
    #[error("batch_qubits must be at least 1")]
    BadBatch,
    #[error("block of {block} pixels exceeds batch_qubits = {limit}")]
    BlockTooLarge { block: usize, limit: usize },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    /// Evenly spaced between the darkest and brightest pixel; for `k = 2`
    /// exactly `{min, max}`.
    #[default]
    Spread,
    /// `k` pixels drawn without replacement from the seeded stream.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub k: usize,
    pub max_iters: usize,
    /// Convergence threshold on the max-norm centroid shift, in gray levels.
    pub tol: f64,
    /// 0 selects exact mode.
    pub shots: u64,
    /// Pixels merged into one product circuit.
    pub batch_qubits: usize,
    pub seed: u64,
    pub init: InitStrategy,
    pub protocol: Protocol,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            k: 2,
            max_iters: 100,
            tol: 0.5,
            shots: 1000,
            batch_qubits: 16,
            seed: 0,
            init: InitStrategy::Spread,
            protocol: Protocol::SimpleOverlap,
        }
    }
}

impl ClusterConfig {
    fn validate(&self, pixels: &[u8]) -> Result<(), ClusterError> {
        if pixels.is_empty() {
            return Err(ClusterError::Empty);
        }
        if self.k == 0 {
            return Err(ClusterError::BadK(self.k));
        }
        if self.batch_qubits == 0 {
            return Err(ClusterError::BadBatch);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    pub centroids: Vec<f64>,
    /// Cluster index of every pixel from the last assignment step.
    pub assignments: Vec<usize>,
    /// Assignment steps performed.
    pub iterations: usize,
    /// Centroids after initialization and after every update.
    pub history: Vec<Vec<f64>>,
    pub converged: bool,
    /// Empty clusters moved to the farthest pixel.
    pub reseeded: usize,
}

impl ClusterState {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centroids.len()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    /// Sum of `|p - centroid|` over all pixels for the final assignment.
    pub fn within_cluster_distance(&self, pixels: &[u8]) -> f64 {
        pixels
            .iter()
            .zip(&self.assignments)
            .map(|(&p, &a)| (p as f64 - self.centroids[a]).abs())
            .sum()
    }
}

/// Centroid as the 8-bit level fed to an angle embedding (ties to even).
pub fn quantize(c: f64) -> u8 {
    let c = c.clamp(0.0, 255.0);
    let mut r = c.round();
    // `round` breaks ties away from zero; pull odd results back to even.
    if r - c == 0.5 && r % 2.0 == 1.0 {
        r -= 1.0;
    }
    r as u8
}

fn initial_centroids(pixels: &[u8], cfg: &ClusterConfig) -> Vec<f64> {
    match cfg.init {
        InitStrategy::Spread => {
            let lo = *pixels.iter().min().expect("non-empty") as f64;
            let hi = *pixels.iter().max().expect("non-empty") as f64;
            if cfg.k == 1 {
                return vec![(lo + hi) / 2.0];
            }
            (0..cfg.k)
                .map(|i| lo + (hi - lo) * i as f64 / (cfg.k - 1) as f64)
                .collect()
        }
        InitStrategy::Random => {
            let mut rng = rng_from_seed(derive_seed(cfg.seed, &[0x1417]));
            let mut idx: Vec<usize> = (0..pixels.len()).collect();
            idx.shuffle(&mut rng);
            (0..cfg.k).map(|i| pixels[idx[i % idx.len()]] as f64).collect()
        }
    }
}

/// Index of the smallest distance; values within `eps` of the minimum
/// count as ties and resolve to the lowest index.
fn argmin(d: &[f64], eps: f64) -> usize {
    let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
    d.iter().position(|&v| v - min <= eps).unwrap_or(0)
}

/// Lloyd iterations with a pluggable assignment step.
///
/// `distances(iteration, centroid_index, level, out)` fills `out` with one
/// distance per pixel to the centroid quantized to `level`.
fn lloyd<D>(pixels: &[u8], cfg: &ClusterConfig, tie_eps: f64, mut distances: D) -> Result<ClusterState, ClusterError>
where
    D: FnMut(usize, usize, u8, &mut [f64]) -> Result<(), ClusterError>,
{
    cfg.validate(pixels)?;
    let k = cfg.k;
    let mut centroids = initial_centroids(pixels, cfg);
    let mut history = vec![centroids.clone()];
    let mut assignments = vec![0usize; pixels.len()];
    let mut table = vec![vec![0.0; pixels.len()]; k];
    let mut reseeded = 0;
    let mut converged = false;
    let mut iterations = 0;
    let mut d = vec![0.0; k];
    while iterations < cfg.max_iters {
        for (j, row) in table.iter_mut().enumerate() {
            distances(iterations, j, quantize(centroids[j]), row)?;
        }
        iterations += 1;
        for (i, a) in assignments.iter_mut().enumerate() {
            for j in 0..k {
                d[j] = table[j][i];
            }
            *a = argmin(&d, tie_eps);
        }
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (&p, &a) in pixels.iter().zip(&assignments) {
            sums[a] += p as f64;
            counts[a] += 1;
        }
        let mut next: Vec<f64> = (0..k)
            .map(|j| {
                if counts[j] > 0 {
                    sums[j] / counts[j] as f64
                } else {
                    f64::NAN
                }
            })
            .collect();
        for j in 0..k {
            if counts[j] == 0 {
                // Farthest pixel from every live centroid.
                let far = pixels
                    .iter()
                    .map(|&p| {
                        let gap = next
                            .iter()
                            .filter(|c| !c.is_nan())
                            .map(|c| (p as f64 - c).abs())
                            .fold(f64::INFINITY, f64::min);
                        (p, gap)
                    })
                    .fold((pixels[0], f64::NEG_INFINITY), |b, x| if x.1 > b.1 { x } else { b });
                next[j] = far.0 as f64;
                reseeded += 1;
            }
        }
        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        centroids = next;
        history.push(centroids.clone());
        if shift < cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(ClusterState {
        centroids,
        assignments,
        iterations,
        history,
        converged,
        reseeded,
    })
}

/// Classical k-means on intensities; distance `|p - q(c)|` where `q` is the
/// same 8-bit quantization the quantum variant embeds.
pub fn kmeans_classical(pixels: &[u8], cfg: &ClusterConfig) -> Result<ClusterState, ClusterError> {
    lloyd(pixels, cfg, 0.0, |_, _, level, out| {
        for (o, &p) in out.iter_mut().zip(pixels) {
            *o = (p as f64 - level as f64).abs();
        }
        Ok(())
    })
}

/// Seed of the shot stream for one (iteration, centroid, pixel) triple.
pub fn pixel_seed(base: u64, iteration: usize, centroid: usize, pixel: usize) -> u64 {
    derive_seed(base, &[iteration as u64, centroid as u64, pixel as u64])
}

/// Distance tolerance treated as an exact tie in the quantum assignment.
/// Distinct integer distances differ by at least `sin^2(pi / 510)` there.
pub const QUANTUM_TIE_EPS: f64 = 1e-9;

/// Simple-overlap distances of a block of pixels to one centroid from a
/// single merged product circuit, one qubit per pixel.
///
/// Qubit `i` carries `RY(p_i pi / 255)` followed by `RY(-c pi / 255)`; its
/// zero probability is the per-pixel overlap, and `dsq = 1 - P(0)`. In shot
/// mode every qubit's tally is drawn with `seeds(i)`.
pub fn batch_distances<S>(block: &[u8], centroid: u8, cfg: &ClusterConfig, seeds: S) -> Result<Vec<f64>, ClusterError>
where
    S: Fn(usize) -> u64,
{
    if block.is_empty() {
        return Err(ClusterError::Empty);
    }
    if block.len() > cfg.batch_qubits {
        return Err(ClusterError::BlockTooLarge {
            block: block.len(),
            limit: cfg.batch_qubits,
        });
    }
    let circuit = batch_circuit(block, centroid)?;
    let marginals = circuit.product_zero_marginals()?;
    marginals
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let raw = if cfg.shots == 0 {
                p
            } else {
                sample_frequency(p, cfg.shots, seeds(i))?
            };
            Ok(1.0 - raw)
        })
        .collect()
}

/// The merged circuit behind [`batch_distances`].
pub fn batch_circuit(block: &[u8], centroid: u8) -> Result<Circuit, ClusterError> {
    let enc = Encoder::intensity();
    let mut c = Circuit::with_qubits(QubitCount::with_limit(block.len(), block.len())?);
    for (q, &p) in block.iter().enumerate() {
        let mut ops = enc.encode_at(&[p as f64], q)?;
        ops.extend(crate::qsim::adjoint_ops(&enc.encode_at(&[centroid as f64], q)?));
        c.extend(ops)?;
    }
    Ok(c)
}

/// q-means: Lloyd iterations whose assignment step uses quantum distances.
///
/// The simple-overlap protocol runs batched product circuits of
/// `batch_qubits` pixels; the swap and Hadamard tests run one circuit per
/// pixel. Results do not depend on evaluation order.
pub fn qmeans(pixels: &[u8], cfg: &ClusterConfig) -> Result<ClusterState, ClusterError> {
    let enc = Encoder::intensity();
    lloyd(pixels, cfg, QUANTUM_TIE_EPS, |it, j, level, out| {
        match cfg.protocol {
            Protocol::SimpleOverlap => {
                for (b, chunk) in pixels.chunks(cfg.batch_qubits).enumerate() {
                    let first = b * cfg.batch_qubits;
                    let d = batch_distances(chunk, level, cfg, |i| pixel_seed(cfg.seed, it, j, first + i))?;
                    out[first..first + chunk.len()].copy_from_slice(&d);
                }
            }
            proto => {
                for (i, (o, &p)) in out.iter_mut().zip(pixels).enumerate() {
                    let r = proto.run(
                        &[p as f64],
                        &[level as f64],
                        &enc,
                        cfg.shots,
                        pixel_seed(cfg.seed, it, j, i),
                    )?;
                    *o = r.dsq;
                }
            }
        }
        Ok(())
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Classical,
    #[default]
    Quantum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    /// Pixels of the darker cluster: the crack candidates.
    pub candidates: Mask,
    pub state: ClusterState,
    pub dark_cluster: usize,
    /// Fewer than two non-empty clusters, or centroids less than one gray
    /// level apart; the candidate mask is then empty.
    pub no_contrast: bool,
}

/// Clusters the pixels of a preprocessed image and marks the darker cluster.
pub fn segment_image(img: &GrayImage, cfg: &ClusterConfig, method: Method) -> Result<Segmentation, ClusterError> {
    let pixels = img.pixels();
    let state = match method {
        Method::Classical => kmeans_classical(pixels, cfg)?,
        Method::Quantum => qmeans(pixels, cfg)?,
    };
    let sizes = state.cluster_sizes();
    let live: Vec<usize> = (0..sizes.len()).filter(|&j| sizes[j] > 0).collect();
    let dark = live.iter().copied().fold(
        live[0],
        |b, j| if state.centroids[j] < state.centroids[b] { j } else { b },
    );
    let spread = live
        .iter()
        .map(|&j| state.centroids[j])
        .fold(f64::NEG_INFINITY, f64::max)
        - state.centroids[dark];
    let no_contrast = live.len() < 2 || spread < 1.0;
    let bits = if no_contrast {
        vec![false; pixels.len()]
    } else {
        state.assignments.iter().map(|&a| a == dark).collect()
    };
    Ok(Segmentation {
        candidates: Mask::from_raw(img.width(), img.height(), bits).expect("same size"),
        state,
        dark_cluster: dark,
        no_contrast,
    })
}
