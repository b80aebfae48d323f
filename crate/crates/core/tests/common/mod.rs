//! Dense-matrix oracle shared by the integration tests.
//!
//! Every gate is lifted to the full register with Kronecker products of
//! 2x2 blocks, so nothing here goes through the simulator's index tricks.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use qseg_core::qsim::Gate;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn mat2(a: [[Complex64; 2]; 2]) -> CMat {
    DMatrix::from_row_slice(2, 2, &[a[0][0], a[0][1], a[1][0], a[1][1]])
}

pub fn identity2() -> CMat {
    CMat::identity(2, 2)
}

pub fn pauli_x() -> CMat {
    mat2([[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]])
}

pub fn pauli_y() -> CMat {
    mat2([[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]])
}

pub fn pauli_z() -> CMat {
    mat2([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]])
}

pub fn proj0() -> CMat {
    mat2([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]])
}

pub fn proj1() -> CMat {
    mat2([[c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]])
}

pub fn ry(t: f64) -> CMat {
    let (s, co) = (t / 2.0).sin_cos();
    mat2([[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]])
}

pub fn rx(t: f64) -> CMat {
    let (s, co) = (t / 2.0).sin_cos();
    mat2([[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]])
}

pub fn rz(t: f64) -> CMat {
    mat2([
        [Complex64::from_polar(1.0, -t / 2.0), c(0.0, 0.0)],
        [c(0.0, 0.0), Complex64::from_polar(1.0, t / 2.0)],
    ])
}

pub fn hadamard() -> CMat {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    mat2([[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]])
}

/// Tensor product of one 2x2 factor per qubit, qubit 0 leftmost.
pub fn kron_all(factors: &[CMat]) -> CMat {
    factors
        .iter()
        .skip(1)
        .fold(factors[0].clone(), |acc, f| acc.kronecker(f))
}

/// `ops` placed on the given qubits, identity elsewhere.
pub fn embed(n: usize, ops: &[(usize, CMat)]) -> CMat {
    let factors: Vec<CMat> = (0..n)
        .map(|q| {
            ops.iter()
                .find(|(k, _)| *k == q)
                .map(|(_, m)| m.clone())
                .unwrap_or_else(identity2)
        })
        .collect();
    kron_all(&factors)
}

fn controlled(n: usize, control: usize, target: usize, u: CMat) -> CMat {
    embed(n, &[(control, proj0())]) + embed(n, &[(control, proj1()), (target, u)])
}

/// Full-register unitary of one gate.
pub fn gate_matrix(n: usize, g: &Gate) -> CMat {
    match g {
        Gate::H(q) => embed(n, &[(*q, hadamard())]),
        Gate::X(q) => embed(n, &[(*q, pauli_x())]),
        Gate::Rx(q, t) => embed(n, &[(*q, rx(*t))]),
        Gate::Ry(q, t) => embed(n, &[(*q, ry(*t))]),
        Gate::Rz(q, t) => embed(n, &[(*q, rz(*t))]),
        Gate::Unitary { qubit, matrix } => embed(n, &[(*qubit, mat2(*matrix))]),
        Gate::Cnot { control, target } => controlled(n, *control, *target, pauli_x()),
        Gate::Cz(a, b) => controlled(n, *a, *b, pauli_z()),
        Gate::Controlled {
            control,
            target,
            matrix,
        } => controlled(n, *control, *target, mat2(*matrix)),
        Gate::Cswap { control, a, b } => {
            // SWAP = (I + XX + YY + ZZ) / 2
            let half = c(0.5, 0.0);
            let swap = (CMat::identity(1 << n, 1 << n)
                + embed(n, &[(*a, pauli_x()), (*b, pauli_x())])
                + embed(n, &[(*a, pauli_y()), (*b, pauli_y())])
                + embed(n, &[(*a, pauli_z()), (*b, pauli_z())]))
                * half;
            embed(n, &[(*control, proj0())]) + embed(n, &[(*control, proj1())]) * swap
        }
    }
}

/// State after applying `gates` to `|0...0>`.
pub fn oracle_state(n: usize, gates: &[Gate]) -> CVec {
    let mut psi = CVec::zeros(1 << n);
    psi[0] = c(1.0, 0.0);
    for g in gates {
        psi = gate_matrix(n, g) * psi;
    }
    psi
}

/// Probability that qubit `q` reads 0.
pub fn oracle_prob_zero(n: usize, psi: &CVec, q: usize) -> f64 {
    let p = embed(n, &[(q, proj0())]);
    (psi.adjoint() * p * psi)[(0, 0)].re
}

/// `<Z_q>`.
pub fn oracle_z(n: usize, psi: &CVec, q: usize) -> f64 {
    let z = embed(n, &[(q, pauli_z())]);
    (psi.adjoint() * z * psi)[(0, 0)].re
}

pub fn inner(a: &CVec, b: &CVec) -> Complex64 {
    a.dotc(b)
}
