//! Classical-to-quantum encoders and overlap/distance circuits.
//!
//! For normalized real states the squared Euclidean distance is an affine
//! function of the inner product, `|x - y|^2 = 2 - 2<x|y>`, so any circuit
//! that estimates the overlap also ranks centroids the same way the
//! classical distance does. Three circuits are provided:
//!
//! * swap test: ancilla-controlled SWAPs between two registers, `P(0) = (1 + |<x|y>|^2) / 2`
//! * Hadamard test: ancilla-controlled `E(y)^dag E(x)`, `<Z> = Re<0|E(y)^dag E(x)|0>`
//! * simple overlap: `E(x)` then `E(y)^dag` on one register, `P(0...0) = |<y|x>|^2`

use alloc::vec::Vec;
use core::f64::consts::{FRAC_2_PI, PI};
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qsim::{self, adjoint_ops, Circuit, Gate, MeasurementSpec, Observable, SimError};
use crate::rng::derive_seed;

/// Above this many data qubits the swap test's CSWAP ladder gets deep.
pub const SWAP_TEST_DEPTH_WARNING: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("value {value} outside encoder range [{min}, {max}]")]
    OutOfRange { value: f64, min: f64, max: f64 },
    #[error("vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("nothing to encode")]
    Empty,
    #[error("empty study grid")]
    EmptyGrid,
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderKind {
    /// `RY(angle)` per value, a real-amplitude embedding.
    AngleRy,
    /// `H` then `RZ(angle)` per value, storing the value in a relative phase.
    PhaseHrz,
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncoderKind::AngleRy => "angle-ry",
            EncoderKind::PhaseHrz => "phase-hrz",
        })
    }
}

/// One-qubit-per-value encoder with a linear map from `[min, max]` onto `[0, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub kind: EncoderKind,
    pub min: f64,
    pub max: f64,
}

impl Encoder {
    /// 8-bit intensities: `p -> RY(p * pi / 255)`.
    pub fn intensity() -> Self {
        Self {
            kind: EncoderKind::AngleRy,
            min: 0.0,
            max: 255.0,
        }
    }

    /// Features already scaled to `[0, pi]`, embedded with `RY`.
    pub fn angle_radians() -> Self {
        Self {
            kind: EncoderKind::AngleRy,
            min: 0.0,
            max: PI,
        }
    }

    /// Features already scaled to `[0, pi]`, embedded as `H` then `RZ`.
    pub fn phase() -> Self {
        Self {
            kind: EncoderKind::PhaseHrz,
            min: 0.0,
            max: PI,
        }
    }

    pub fn for_kind(kind: EncoderKind) -> Self {
        match kind {
            EncoderKind::AngleRy => Self::angle_radians(),
            EncoderKind::PhaseHrz => Self::phase(),
        }
    }

    /// Rotation angle for a raw value.
    pub fn angle(&self, value: f64) -> Result<f64, ProtocolError> {
        // NaN fails both comparisons and is rejected here too.
        if !(value >= self.min && value <= self.max) {
            return Err(ProtocolError::OutOfRange {
                value,
                min: self.min,
                max: self.max,
            });
        }
        Ok((value - self.min) / (self.max - self.min) * PI)
    }

    /// Gate fragment encoding `values` on qubits `first..first + len`.
    pub fn encode_at(&self, values: &[f64], first: usize) -> Result<Vec<Gate>, ProtocolError> {
        if values.is_empty() {
            return Err(ProtocolError::Empty);
        }
        let mut ops = Vec::with_capacity(values.len() * 2);
        for (i, &v) in values.iter().enumerate() {
            let theta = self.angle(v)?;
            let q = first + i;
            match self.kind {
                EncoderKind::AngleRy => ops.push(Gate::Ry(q, theta)),
                EncoderKind::PhaseHrz => {
                    ops.push(Gate::H(q));
                    ops.push(Gate::Rz(q, theta));
                }
            }
        }
        Ok(ops)
    }

    /// Gate fragment encoding `values` on qubits `0..len`.
    pub fn encode(&self, values: &[f64]) -> Result<Vec<Gate>, ProtocolError> {
        self.encode_at(values, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    SwapTest,
    HadamardTest,
    SimpleOverlap,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::SwapTest, Protocol::HadamardTest, Protocol::SimpleOverlap];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::SwapTest => "swap",
            Protocol::HadamardTest => "hadamard",
            Protocol::SimpleOverlap => "overlap",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "swap" | "swap-test" => Some(Protocol::SwapTest),
            "hadamard" | "hadamard-test" => Some(Protocol::HadamardTest),
            "overlap" | "simple-overlap" => Some(Protocol::SimpleOverlap),
            _ => None,
        }
    }

    /// Runs the protocol on `x` and `y`.
    pub fn run(
        self,
        x: &[f64],
        y: &[f64],
        enc: &Encoder,
        shots: u64,
        seed: u64,
    ) -> Result<SimilarityResult, ProtocolError> {
        match self {
            Protocol::SwapTest => swap_test(x, y, enc, shots, seed),
            Protocol::HadamardTest => hadamard_test(x, y, enc, shots, seed),
            Protocol::SimpleOverlap => simple_overlap(x, y, enc, shots, seed),
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome of one similarity circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityResult {
    pub protocol: Protocol,
    /// The circuit's native quantity: `P(0)` of the ancilla for the swap
    /// test, ancilla `<Z>` for the Hadamard test, `P(0...0)` for the simple
    /// overlap.
    pub raw: f64,
    /// `|<x|y>|^2` for the swap test and simple overlap, `Re<x|y>` for the
    /// Hadamard test.
    pub overlap: f64,
    /// Squared distance: `2 - 2<x|y>` for the swap and Hadamard tests,
    /// `1 - P(0...0)` for the simple overlap.
    pub dsq: f64,
    pub shots: u64,
    /// Set when shot noise pushed the overlap outside its valid range.
    pub clamped: bool,
}

fn check_lengths(x: &[f64], y: &[f64]) -> Result<usize, ProtocolError> {
    if x.len() != y.len() {
        return Err(ProtocolError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(ProtocolError::Empty);
    }
    Ok(x.len())
}

fn measure(c: &Circuit, obs: Observable, shots: u64, seed: u64) -> Result<f64, ProtocolError> {
    Ok(qsim::run(c, &MeasurementSpec::sampled(obs, shots, seed))?)
}

/// Swap-test circuit: ancilla 0, `x` on qubits `1..=m`, `y` on `m+1..=2m`.
pub fn swap_test_circuit(x: &[f64], y: &[f64], enc: &Encoder) -> Result<Circuit, ProtocolError> {
    let m = check_lengths(x, y)?;
    if 2 * m > SWAP_TEST_DEPTH_WARNING {
        log::warn!("swap test on {} data qubits: {} CSWAPs deepen the circuit", 2 * m, m);
    }
    let mut c = Circuit::new(1 + 2 * m)?;
    c.extend(enc.encode_at(x, 1)?)?;
    c.extend(enc.encode_at(y, 1 + m)?)?;
    c.push(Gate::H(0))?;
    for i in 0..m {
        c.push(Gate::Cswap {
            control: 0,
            a: 1 + i,
            b: 1 + m + i,
        })?;
    }
    c.push(Gate::H(0))?;
    Ok(c)
}

/// Swap test. `raw = P(ancilla = 0)`, `overlap = 2 raw - 1`.
pub fn swap_test(
    x: &[f64],
    y: &[f64],
    enc: &Encoder,
    shots: u64,
    seed: u64,
) -> Result<SimilarityResult, ProtocolError> {
    let c = swap_test_circuit(x, y, enc)?;
    let raw = measure(&c, Observable::ZeroProbability(0), shots, seed)?;
    let unclamped = 2.0 * raw - 1.0;
    let overlap = unclamped.clamp(0.0, 1.0);
    Ok(SimilarityResult {
        protocol: Protocol::SwapTest,
        raw,
        overlap,
        // Angle embeddings of values in range have non-negative overlaps.
        dsq: 2.0 - 2.0 * overlap.sqrt(),
        shots,
        clamped: overlap != unclamped,
    })
}

/// Hadamard-test circuit with `U = E(y)^dag E(x)` and `|psi> = |0>`.
///
/// The controlled-U is built gate by gate: each single-qubit gate of the
/// product is promoted to its ancilla-controlled form.
pub fn hadamard_test_circuit(x: &[f64], y: &[f64], enc: &Encoder) -> Result<Circuit, ProtocolError> {
    let m = check_lengths(x, y)?;
    let mut u = enc.encode_at(x, 1)?;
    u.extend(adjoint_ops(&enc.encode_at(y, 1)?));
    let mut c = Circuit::new(1 + m)?;
    c.push(Gate::H(0))?;
    for g in &u {
        c.push(g.controlled(0)?)?;
    }
    c.push(Gate::H(0))?;
    Ok(c)
}

/// Hadamard test. `raw = <Z>` of the ancilla, `dsq = 2 - 2 raw`.
pub fn hadamard_test(
    x: &[f64],
    y: &[f64],
    enc: &Encoder,
    shots: u64,
    seed: u64,
) -> Result<SimilarityResult, ProtocolError> {
    let c = hadamard_test_circuit(x, y, enc)?;
    let raw = measure(&c, Observable::ZExpectation(0), shots, seed)?;
    Ok(SimilarityResult {
        protocol: Protocol::HadamardTest,
        raw,
        overlap: raw,
        dsq: 2.0 - 2.0 * raw,
        shots,
        clamped: false,
    })
}

/// Simple-overlap circuit: `E(x)` followed by `E(y)^dag` on the same qubits.
pub fn simple_overlap_circuit(x: &[f64], y: &[f64], enc: &Encoder) -> Result<Circuit, ProtocolError> {
    let m = check_lengths(x, y)?;
    let mut c = Circuit::new(m)?;
    c.extend(enc.encode(x)?)?;
    c.extend(adjoint_ops(&enc.encode(y)?))?;
    Ok(c)
}

/// Simple overlap. `raw = P(0...0) = |<y|x>|^2`, `dsq = 1 - raw`.
pub fn simple_overlap(
    x: &[f64],
    y: &[f64],
    enc: &Encoder,
    shots: u64,
    seed: u64,
) -> Result<SimilarityResult, ProtocolError> {
    let c = simple_overlap_circuit(x, y, enc)?;
    let raw = measure(&c, Observable::AllZeroProbability, shots, seed)?;
    Ok(SimilarityResult {
        protocol: Protocol::SimpleOverlap,
        raw,
        overlap: raw,
        dsq: 1.0 - raw,
        shots,
        clamped: false,
    })
}

/// How a protocol outcome is turned into an estimate of `((p - c) / 255)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceEstimator {
    /// Inverts the intensity embedding: with `|<x|y>| = cos(t pi / 2)` the
    /// estimate is `t^2`, exact in the noiseless limit.
    Calibrated,
    /// The protocol's own `dsq`; keeps argmin order but is biased against
    /// the scaled classical distance.
    Convention,
}

impl DistanceEstimator {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "calibrated" => Some(Self::Calibrated),
            "convention" => Some(Self::Convention),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Calibrated => "calibrated",
            Self::Convention => "convention",
        }
    }

    /// Maps a single-qubit intensity comparison to a scaled squared distance.
    pub fn estimate(self, r: &SimilarityResult) -> f64 {
        match self {
            Self::Convention => r.dsq,
            Self::Calibrated => {
                let cos_half = match r.protocol {
                    Protocol::HadamardTest => r.overlap,
                    Protocol::SwapTest | Protocol::SimpleOverlap => r.overlap.sqrt(),
                };
                let t = FRAC_2_PI * cos_half.clamp(0.0, 1.0).acos();
                t * t
            }
        }
    }
}

/// Inputs of the shot-count error study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub protocol: Protocol,
    /// Shot counts to evaluate; `0` is exact mode.
    pub shot_grid: Vec<u64>,
    /// Pixel intensities swept for every centroid.
    pub p_values: Vec<u8>,
    pub c_values: Vec<u8>,
    pub seeds: u64,
    pub base_seed: u64,
    pub estimator: DistanceEstimator,
}

/// One `(shots, c)` cell of the study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub protocol: Protocol,
    pub shots: u64,
    pub c: u8,
    pub mean_abs_err: f64,
    pub std_err_abs: f64,
    pub seed_count: u64,
}

/// Mean and standard deviation of `|estimate - ((p - c)/255)^2|` over the
/// `p` sweep and all seeds, for every `(shots, c)` pair.
pub fn distance_error_study(cfg: &StudyConfig) -> Result<Vec<ErrorRow>, ProtocolError> {
    if cfg.shot_grid.is_empty() || cfg.p_values.is_empty() || cfg.c_values.is_empty() {
        return Err(ProtocolError::EmptyGrid);
    }
    let enc = Encoder::intensity();
    let mut rows = Vec::with_capacity(cfg.shot_grid.len() * cfg.c_values.len());
    for &shots in &cfg.shot_grid {
        // Exact mode has nothing to average over.
        let seeds = if shots == 0 { 1 } else { cfg.seeds.max(1) };
        for &c in &cfg.c_values {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            let mut count = 0usize;
            for s in 0..seeds {
                for &p in &cfg.p_values {
                    let seed = derive_seed(cfg.base_seed, &[s, shots, c as u64, p as u64]);
                    let r = cfg.protocol.run(&[p as f64], &[c as f64], &enc, shots, seed)?;
                    let reference = ((p as f64 - c as f64) / 255.0).powi(2);
                    let err = (cfg.estimator.estimate(&r) - reference).abs();
                    sum += err;
                    sum_sq += err * err;
                    count += 1;
                }
            }
            let n = count as f64;
            let mean = sum / n;
            let var = if count > 1 {
                ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            rows.push(ErrorRow {
                protocol: cfg.protocol,
                shots,
                c,
                mean_abs_err: mean,
                std_err_abs: var.sqrt(),
                seed_count: seeds,
            });
        }
    }
    Ok(rows)
}
