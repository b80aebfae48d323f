//! Dense statevector simulator.
//!
//! Basis-state indices are big-endian in qubit order: qubit 0 is the most
//! significant bit of the index, so on three qubits `|q0 q1 q2> = |100>` is
//! amplitude index 4.
//!
//! Two execution modes share one circuit representation. Exact mode
//! (`shots == 0`) evaluates probabilities and expectations directly from the
//! final amplitudes. Shot mode samples measurement outcomes from the same
//! distribution with a seeded [`Rng`](crate::rng::Rng).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng as _;
use rand_distr::{Binomial, Distribution};
use thiserror::Error;

use crate::rng::rng_from_seed;

/// Default cap on simulated register width.
pub const DEFAULT_MAX_QUBITS: usize = 20;

/// 2x2 complex matrix, row major.
pub type Mat2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("register must hold at least one qubit")]
    ZeroQubits,
    #[error("{requested} qubits exceeds the simulator limit of {limit}")]
    TooManyQubits { requested: usize, limit: usize },
    #[error("qubit index {qubit} out of range for a {n}-qubit register")]
    QubitOutOfRange { qubit: usize, n: usize },
    #[error("gate uses qubit {0} more than once")]
    DuplicateQubit(usize),
    #[error("rotation angle is not finite")]
    NonFiniteAngle,
    #[error("gate has no single-qubit controlled form")]
    NotPromotable,
    #[error("exact evaluation requires shots = 0, got {0}")]
    ShotsInExactMode(u64),
    #[error("sampled evaluation requires at least one shot")]
    NoShots,
    #[error("measurement is incompatible with the circuit: {0}")]
    IncompatibleMeasurement(&'static str),
    #[error("register width mismatch: expected {expected}, found {found}")]
    WidthMismatch { expected: usize, found: usize },
}

/// Validated register width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QubitCount(usize);

impl QubitCount {
    pub fn new(n: usize) -> Result<Self, SimError> {
        Self::with_limit(n, DEFAULT_MAX_QUBITS)
    }

    pub fn with_limit(n: usize, limit: usize) -> Result<Self, SimError> {
        if n == 0 {
            return Err(SimError::ZeroQubits);
        }
        if n > limit {
            return Err(SimError::TooManyQubits { requested: n, limit });
        }
        Ok(Self(n))
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Length of the statevector, `2^n`.
    pub fn dim(self) -> usize {
        1usize << self.0
    }
}

/// A unitary gate application.
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    H(usize),
    X(usize),
    Rx(usize, f64),
    Ry(usize, f64),
    Rz(usize, f64),
    /// Arbitrary single-qubit unitary.
    Unitary {
        qubit: usize,
        matrix: Mat2,
    },
    Cnot {
        control: usize,
        target: usize,
    },
    Cz(usize, usize),
    Cswap {
        control: usize,
        a: usize,
        b: usize,
    },
    /// Single-qubit unitary applied to `target` when `control` is `|1>`.
    Controlled {
        control: usize,
        target: usize,
        matrix: Mat2,
    },
}

impl Gate {
    /// Qubits touched by the gate, controls first.
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::H(q) | Gate::X(q) | Gate::Rx(q, _) | Gate::Ry(q, _) | Gate::Rz(q, _) => vec![q],
            Gate::Unitary { qubit, .. } => vec![qubit],
            Gate::Cnot { control, target } | Gate::Controlled { control, target, .. } => {
                vec![control, target]
            }
            Gate::Cz(a, b) => vec![a, b],
            Gate::Cswap { control, a, b } => vec![control, a, b],
        }
    }

    pub fn is_single_qubit(&self) -> bool {
        self.qubits().len() == 1
    }

    /// Checks indices and angles against a register of width `n`.
    pub fn validate(&self, n: usize) -> Result<(), SimError> {
        let qs = self.qubits();
        for (i, &q) in qs.iter().enumerate() {
            if q >= n {
                return Err(SimError::QubitOutOfRange { qubit: q, n });
            }
            if qs[..i].contains(&q) {
                return Err(SimError::DuplicateQubit(q));
            }
        }
        match *self {
            Gate::Rx(_, t) | Gate::Ry(_, t) | Gate::Rz(_, t) if !t.is_finite() => Err(SimError::NonFiniteAngle),
            Gate::Unitary { matrix, .. } | Gate::Controlled { matrix, .. }
                if matrix.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) =>
            {
                Err(SimError::NonFiniteAngle)
            }
            _ => Ok(()),
        }
    }

    /// The 2x2 matrix of a single-qubit gate.
    pub fn matrix(&self) -> Option<Mat2> {
        let m = match *self {
            Gate::H(_) => {
                let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
                [[h, h], [h, -h]]
            }
            Gate::X(_) => [[ZERO, ONE], [ONE, ZERO]],
            Gate::Rx(_, t) => {
                let (s, c) = (t / 2.0).sin_cos();
                [
                    [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
                    [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
                ]
            }
            Gate::Ry(_, t) => {
                let (s, c) = (t / 2.0).sin_cos();
                [
                    [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                    [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
                ]
            }
            Gate::Rz(_, t) => {
                let (s, c) = (t / 2.0).sin_cos();
                [[Complex64::new(c, -s), ZERO], [ZERO, Complex64::new(c, s)]]
            }
            Gate::Unitary { matrix, .. } => matrix,
            _ => return None,
        };
        Some(m)
    }

    /// The inverse gate.
    pub fn adjoint(&self) -> Gate {
        match *self {
            Gate::Rx(q, t) => Gate::Rx(q, -t),
            Gate::Ry(q, t) => Gate::Ry(q, -t),
            Gate::Rz(q, t) => Gate::Rz(q, -t),
            Gate::Unitary { qubit, matrix } => Gate::Unitary {
                qubit,
                matrix: dagger(&matrix),
            },
            Gate::Controlled {
                control,
                target,
                matrix,
            } => Gate::Controlled {
                control,
                target,
                matrix: dagger(&matrix),
            },
            ref g => g.clone(),
        }
    }

    /// Promotes a single-qubit gate to its controlled form.
    pub fn controlled(&self, control: usize) -> Result<Gate, SimError> {
        let matrix = self.matrix().ok_or(SimError::NotPromotable)?;
        let target = self.qubits()[0];
        if target == control {
            return Err(SimError::DuplicateQubit(control));
        }
        Ok(Gate::Controlled {
            control,
            target,
            matrix,
        })
    }

    /// Same gate with every qubit index shifted by `offset`.
    pub fn shifted(&self, offset: usize) -> Gate {
        let mut g = self.clone();
        match &mut g {
            Gate::H(q) | Gate::X(q) | Gate::Rx(q, _) | Gate::Ry(q, _) | Gate::Rz(q, _) => *q += offset,
            Gate::Unitary { qubit, .. } => *qubit += offset,
            Gate::Cnot { control, target } | Gate::Controlled { control, target, .. } => {
                *control += offset;
                *target += offset;
            }
            Gate::Cz(a, b) => {
                *a += offset;
                *b += offset;
            }
            Gate::Cswap { control, a, b } => {
                *control += offset;
                *a += offset;
                *b += offset;
            }
        }
        g
    }
}

fn dagger(m: &Mat2) -> Mat2 {
    [[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]]
}

/// Inverse of an ordered gate list: reversed, each gate adjointed.
pub fn adjoint_ops(ops: &[Gate]) -> Vec<Gate> {
    ops.iter().rev().map(Gate::adjoint).collect()
}

/// An ordered list of gates on a fixed-width register.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    qubits: QubitCount,
    ops: Vec<Gate>,
}

impl Circuit {
    pub fn new(n: usize) -> Result<Self, SimError> {
        Ok(Self {
            qubits: QubitCount::new(n)?,
            ops: Vec::new(),
        })
    }

    pub fn with_qubits(qubits: QubitCount) -> Self {
        Self {
            qubits,
            ops: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.qubits.get()
    }

    pub fn qubit_count(&self) -> QubitCount {
        self.qubits
    }

    pub fn ops(&self) -> &[Gate] {
        &self.ops
    }

    pub fn push(&mut self, gate: Gate) -> Result<&mut Self, SimError> {
        gate.validate(self.n_qubits())?;
        self.ops.push(gate);
        Ok(self)
    }

    pub fn extend<I: IntoIterator<Item = Gate>>(&mut self, gates: I) -> Result<&mut Self, SimError> {
        for g in gates {
            self.push(g)?;
        }
        Ok(self)
    }

    /// Reversed-adjoint circuit; `c` followed by `c.adjoint()` is the identity.
    pub fn adjoint(&self) -> Circuit {
        Circuit {
            qubits: self.qubits,
            ops: adjoint_ops(&self.ops),
        }
    }

    /// True when no gate spans more than one qubit.
    pub fn is_product(&self) -> bool {
        self.ops.iter().all(Gate::is_single_qubit)
    }

    /// Zero-outcome probability of every qubit of an unentangled circuit,
    /// simulating each qubit on its own two amplitudes.
    ///
    /// Each entry is bit-identical to running that qubit's gates as a
    /// one-qubit circuit, and the cost is linear in the register width.
    pub fn product_zero_marginals(&self) -> Result<Vec<f64>, SimError> {
        if !self.is_product() {
            return Err(SimError::IncompatibleMeasurement("circuit entangles qubits"));
        }
        let mut states = vec![[ONE, ZERO]; self.n_qubits()];
        for g in &self.ops {
            let m = g.matrix().expect("single-qubit gate");
            let s = &mut states[g.qubits()[0]];
            let (a, b) = (s[0], s[1]);
            s[0] = m[0][0] * a + m[0][1] * b;
            s[1] = m[1][0] * a + m[1][1] * b;
        }
        Ok(states.iter().map(|s| s[0].norm_sqr()).collect())
    }

    /// Final state after applying every gate to `|0...0>`.
    pub fn statevector(&self) -> Statevector {
        let mut s = Statevector::zero(self.qubits);
        for g in &self.ops {
            // Gates were validated on push.
            s.apply_unchecked(g);
        }
        s
    }
}

/// Dense amplitude vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// `|0...0>`
    pub fn zero(qubits: QubitCount) -> Self {
        let mut amps = vec![ZERO; qubits.dim()];
        amps[0] = ONE;
        Self { n: qubits.get(), amps }
    }

    /// Wraps raw amplitudes; the length must be a power of two.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self, SimError> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(SimError::IncompatibleMeasurement("amplitude count is not 2^n"));
        }
        Ok(Self {
            n: len.trailing_zeros() as usize,
            amps,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &Statevector) -> Result<Complex64, SimError> {
        if self.n != other.n {
            return Err(SimError::WidthMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn fidelity(&self, other: &Statevector) -> Result<f64, SimError> {
        Ok(self.inner(other)?.norm_sqr())
    }

    #[inline]
    fn bit(&self, q: usize) -> usize {
        1 << (self.n - 1 - q)
    }

    /// Applies `gate` in place.
    pub fn apply(&mut self, gate: &Gate) -> Result<(), SimError> {
        gate.validate(self.n)?;
        self.apply_unchecked(gate);
        Ok(())
    }

    fn apply_unchecked(&mut self, gate: &Gate) {
        match *gate {
            Gate::Cnot { control, target } => {
                let (cb, tb) = (self.bit(control), self.bit(target));
                for i in 0..self.amps.len() {
                    if i & cb != 0 && i & tb == 0 {
                        self.amps.swap(i, i | tb);
                    }
                }
            }
            Gate::Cz(a, b) => {
                let mask = self.bit(a) | self.bit(b);
                for (i, amp) in self.amps.iter_mut().enumerate() {
                    if i & mask == mask {
                        *amp = -*amp;
                    }
                }
            }
            Gate::Cswap { control, a, b } => {
                let (cb, ab, bb) = (self.bit(control), self.bit(a), self.bit(b));
                for i in 0..self.amps.len() {
                    if i & cb != 0 && i & ab != 0 && i & bb == 0 {
                        self.amps.swap(i, (i & !ab) | bb);
                    }
                }
            }
            Gate::Controlled {
                control,
                target,
                matrix,
            } => {
                let cb = self.bit(control);
                self.apply_single(target, &matrix, cb);
            }
            ref g => {
                let q = g.qubits()[0];
                let m = g.matrix().expect("single-qubit gate");
                self.apply_single(q, &m, 0);
            }
        }
    }

    /// Applies `m` to qubit `q` on every basis pair whose index contains all
    /// bits of `control_mask`.
    fn apply_single(&mut self, q: usize, m: &Mat2, control_mask: usize) {
        let tb = self.bit(q);
        for i in 0..self.amps.len() {
            if i & tb != 0 || i & control_mask != control_mask {
                continue;
            }
            let j = i | tb;
            let (a, b) = (self.amps[i], self.amps[j]);
            self.amps[i] = m[0][0] * a + m[0][1] * b;
            self.amps[j] = m[1][0] * a + m[1][1] * b;
        }
    }

    /// Probability of every basis state.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(Complex64::norm_sqr).collect()
    }

    /// Probability that qubit `q` reads 0.
    pub fn prob_zero(&self, q: usize) -> Result<f64, SimError> {
        if q >= self.n {
            return Err(SimError::QubitOutOfRange { qubit: q, n: self.n });
        }
        let b = self.bit(q);
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & b == 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Probability that every qubit reads 0.
    pub fn prob_all_zero(&self) -> f64 {
        self.amps[0].norm_sqr()
    }

    /// `<Z_q>`
    pub fn expectation_z(&self, q: usize) -> Result<f64, SimError> {
        Ok(2.0 * self.prob_zero(q)? - 1.0)
    }

    /// Zero-outcome probability of every qubit in one pass.
    pub fn zero_marginals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            for (q, slot) in out.iter_mut().enumerate() {
                if i & self.bit(q) == 0 {
                    *slot += p;
                }
            }
        }
        out
    }
}

/// What a run reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    /// Pauli-Z expectation of one qubit, in `[-1, 1]`.
    ZExpectation(usize),
    /// Probability of the all-zero outcome (the zero projector).
    AllZeroProbability,
    /// Probability that one qubit reads 0.
    ZeroProbability(usize),
    /// Raw bitstring samples; not a scalar, see [`sample_bitstrings`].
    BitstringSample,
}

/// Observable plus execution mode. `shots == 0` selects exact mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeasurementSpec {
    pub observable: Observable,
    pub shots: u64,
    pub seed: u64,
}

impl MeasurementSpec {
    pub fn exact(observable: Observable) -> Self {
        Self {
            observable,
            shots: 0,
            seed: 0,
        }
    }

    pub fn sampled(observable: Observable, shots: u64, seed: u64) -> Self {
        Self {
            observable,
            shots,
            seed,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.shots == 0
    }
}

/// Probability of the event an observable counts, plus the affine map from
/// event frequency back to the reported value.
fn event_probability(state: &Statevector, obs: Observable) -> Result<(f64, bool), SimError> {
    match obs {
        Observable::ZExpectation(q) => Ok((state.prob_zero(q)?, true)),
        Observable::ZeroProbability(q) => Ok((state.prob_zero(q)?, false)),
        Observable::AllZeroProbability => Ok((state.prob_all_zero(), false)),
        Observable::BitstringSample => Err(SimError::IncompatibleMeasurement(
            "bitstring sampling has no scalar value",
        )),
    }
}

/// Exact value of the observable on a prepared state.
pub fn evaluate_exact(state: &Statevector, obs: Observable) -> Result<f64, SimError> {
    let (p, is_z) = event_probability(state, obs)?;
    let p = p.clamp(0.0, 1.0);
    Ok(if is_z { 2.0 * p - 1.0 } else { p })
}

/// Shot estimate of the observable on a prepared state.
///
/// The outcome count of the measured event is drawn as
/// `Binomial(shots, p_event)`, which is exactly the distribution of the tally
/// of `shots` independent projective measurements.
pub fn evaluate_shots(state: &Statevector, obs: Observable, shots: u64, seed: u64) -> Result<f64, SimError> {
    if shots == 0 {
        return Err(SimError::NoShots);
    }
    let (p, is_z) = event_probability(state, obs)?;
    let hits = binomial_draw(shots, p, seed);
    let freq = hits as f64 / shots as f64;
    Ok(if is_z { 2.0 * freq - 1.0 } else { freq })
}

/// Observed frequency of an event of probability `p` over `shots` trials.
pub fn sample_frequency(p: f64, shots: u64, seed: u64) -> Result<f64, SimError> {
    if shots == 0 {
        return Err(SimError::NoShots);
    }
    Ok(binomial_draw(shots, p, seed) as f64 / shots as f64)
}

fn binomial_draw(shots: u64, p: f64, seed: u64) -> u64 {
    let p = p.clamp(0.0, 1.0);
    if p == 0.0 {
        return 0;
    }
    if p == 1.0 {
        return shots;
    }
    let mut rng = rng_from_seed(seed);
    Binomial::new(shots, p).expect("p within [0, 1]").sample(&mut rng)
}

/// Exact probability or expectation of `m.observable` after `c`.
pub fn run_exact(c: &Circuit, m: &MeasurementSpec) -> Result<f64, SimError> {
    if m.shots != 0 {
        return Err(SimError::ShotsInExactMode(m.shots));
    }
    evaluate_exact(&c.statevector(), m.observable)
}

/// Shot-sampled estimate of `m.observable` after `c`.
pub fn run_shots(c: &Circuit, m: &MeasurementSpec) -> Result<f64, SimError> {
    evaluate_shots(&c.statevector(), m.observable, m.shots, m.seed)
}

/// Dispatches on `m.shots`: exact when zero, sampled otherwise.
pub fn run(c: &Circuit, m: &MeasurementSpec) -> Result<f64, SimError> {
    if m.is_exact() {
        run_exact(c, m)
    } else {
        run_shots(c, m)
    }
}

/// Draws `shots` basis-state indices from the final distribution of `c`.
pub fn sample_bitstrings(c: &Circuit, shots: u64, seed: u64) -> Result<Vec<usize>, SimError> {
    if shots == 0 {
        return Err(SimError::NoShots);
    }
    let probs = c.statevector().probabilities();
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in &probs {
        acc += p;
        cdf.push(acc);
    }
    let total = acc;
    let last_nonzero = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    let mut rng = rng_from_seed(seed);
    Ok((0..shots)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * total;
            let idx = cdf.partition_point(|&c| c <= u);
            // Guard against rounding past the last populated outcome.
            let idx = idx.min(last_nonzero);
            // Skip zero-probability states that share a cdf value.
            if probs[idx] == 0.0 {
                (idx..=last_nonzero).find(|&k| probs[k] > 0.0).unwrap_or(last_nonzero)
            } else {
                idx
            }
        })
        .collect())
}

/// Formats a basis index as a bitstring, qubit 0 first.
pub fn format_bitstring(index: usize, n: usize) -> String {
    (0..n)
        .map(|q| if index & (1 << (n - 1 - q)) != 0 { '1' } else { '0' })
        .collect()
}
