//! Variational quantum classifiers.
//!
//! A model encodes an `n`-feature vector (already scaled to `[0, pi]`) on `n`
//! qubits, applies a layered parameterized ansatz and reads the Pauli-Z
//! expectation of qubit 0. A trainable bias shifts that expectation and the
//! sign of the sum is the class.

use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureError, FeatureMatrix};
use crate::optim::{minimize_observed, OptimError, OptimizerConfig, Termination};
use crate::protocols::{Encoder, EncoderKind, ProtocolError};
use crate::qsim::{Circuit, Gate, MeasurementSpec, Observable, SimError};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VqcError {
    #[error("{kind} ansatz needs {expected} parameters, got {got}")]
    ParamCount {
        kind: AnsatzKind,
        expected: usize,
        got: usize,
    },
    #[error("fixed-topology ansatz requires angle-ry encoding, not {0}")]
    IncompatibleEncoding(EncoderKind),
    #[error("ansatz needs at least one qubit and one layer")]
    EmptyAnsatz,
    #[error("model has {expected} qubits but got {got} features")]
    FeatureCount { expected: usize, got: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset has no labels")]
    Unlabeled,
    #[error(transparent)]
    Encoding(#[from] ProtocolError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Optim(#[from] OptimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnsatzKind {
    /// `RY RZ RY` on every qubit, then skip-connected CNOTs.
    StronglyEntangling,
    /// `RY` on every qubit, then skip-connected CNOTs.
    BasicEntangling,
    /// Paired CNOTs, then offset-paired CNOTs, then `RY` on every qubit.
    FixedTopology,
}

impl AnsatzKind {
    pub const ALL: [AnsatzKind; 3] = [Self::StronglyEntangling, Self::BasicEntangling, Self::FixedTopology];

    pub fn name(self) -> &'static str {
        match self {
            Self::StronglyEntangling => "strongly-entangling",
            Self::BasicEntangling => "basic-entangling",
            Self::FixedTopology => "fixed-topology",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "strongly-entangling" | "strongly" | "strong" => Some(Self::StronglyEntangling),
            "basic-entangling" | "basic" => Some(Self::BasicEntangling),
            "fixed-topology" | "fixed" => Some(Self::FixedTopology),
            _ => None,
        }
    }

    fn rotations_per_qubit(self) -> usize {
        match self {
            Self::StronglyEntangling => 3,
            Self::BasicEntangling | Self::FixedTopology => 1,
        }
    }
}

impl core::fmt::Display for AnsatzKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ansatz {
    pub kind: AnsatzKind,
    pub qubits: usize,
    pub layers: usize,
}

impl Ansatz {
    pub fn new(kind: AnsatzKind, qubits: usize, layers: usize) -> Result<Self, VqcError> {
        if qubits == 0 || layers == 0 {
            return Err(VqcError::EmptyAnsatz);
        }
        Ok(Self { kind, qubits, layers })
    }

    /// `3nL` for strongly entangling layers, `nL` otherwise.
    pub fn param_count(&self) -> usize {
        self.kind.rotations_per_qubit() * self.qubits * self.layers
    }

    /// CNOT `(control, target)` pairs of layer `l` in the skip-connected
    /// pattern: control `c` targets `(c + l + 1) mod n`. Pairs whose target
    /// wraps onto the control are left out.
    pub fn skip_cnots(qubits: usize, layer: usize) -> impl Iterator<Item = (usize, usize)> {
        (0..qubits)
            .map(move |c| (c, (c + layer + 1) % qubits))
            .filter(|(c, t)| c != t)
    }

    /// Gates of the ansatz for `params`, laid out layer by layer, qubit by
    /// qubit, rotation by rotation.
    pub fn gates(&self, params: &[f64]) -> Result<Vec<Gate>, VqcError> {
        if params.len() != self.param_count() {
            return Err(VqcError::ParamCount {
                kind: self.kind,
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let n = self.qubits;
        let per_layer = self.kind.rotations_per_qubit() * n;
        let mut ops = Vec::with_capacity(self.layers * (per_layer + n));
        for (l, p) in params.chunks_exact(per_layer).enumerate() {
            match self.kind {
                AnsatzKind::StronglyEntangling => {
                    for q in 0..n {
                        ops.push(Gate::Ry(q, p[3 * q]));
                        ops.push(Gate::Rz(q, p[3 * q + 1]));
                        ops.push(Gate::Ry(q, p[3 * q + 2]));
                    }
                    ops.extend(Self::skip_cnots(n, l).map(|(control, target)| Gate::Cnot { control, target }));
                }
                AnsatzKind::BasicEntangling => {
                    ops.extend((0..n).map(|q| Gate::Ry(q, p[q])));
                    ops.extend(Self::skip_cnots(n, l).map(|(control, target)| Gate::Cnot { control, target }));
                }
                AnsatzKind::FixedTopology => {
                    ops.extend(
                        (0..n / 2)
                            .map(|i| (2 * i, 2 * i + 1))
                            .chain((0..n.saturating_sub(1) / 2).map(|i| (2 * i + 1, 2 * i + 2)))
                            .map(|(control, target)| Gate::Cnot { control, target }),
                    );
                    ops.extend((0..n).map(|q| Gate::Ry(q, p[q])));
                }
            }
        }
        Ok(ops)
    }
}

/// `shots == 0` evaluates circuits exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct Execution {
    pub shots: u64,
    pub seed: u64,
}

impl Execution {
    pub fn exact() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqcModel {
    pub ansatz: Ansatz,
    pub encoder: EncoderKind,
    pub params: Vec<f64>,
    pub bias: f64,
}

impl VqcModel {
    pub fn new(ansatz: Ansatz, encoder: EncoderKind, params: Vec<f64>, bias: f64) -> Result<Self, VqcError> {
        if ansatz.kind == AnsatzKind::FixedTopology && encoder != EncoderKind::AngleRy {
            return Err(VqcError::IncompatibleEncoding(encoder));
        }
        if params.len() != ansatz.param_count() {
            return Err(VqcError::ParamCount {
                kind: ansatz.kind,
                expected: ansatz.param_count(),
                got: params.len(),
            });
        }
        Ok(Self {
            ansatz,
            encoder,
            params,
            bias,
        })
    }

    /// Parameters drawn uniformly from `(-0.1, 0.1)`, zero bias.
    pub fn init(ansatz: Ansatz, encoder: EncoderKind, seed: u64) -> Result<Self, VqcError> {
        let mut rng = rng_from_seed(seed);
        let params = (0..ansatz.param_count()).map(|_| rng.random_range(-0.1..0.1)).collect();
        Self::new(ansatz, encoder, params, 0.0)
    }

    pub fn qubits(&self) -> usize {
        self.ansatz.qubits
    }

    pub fn circuit(&self, features: &[f64]) -> Result<Circuit, VqcError> {
        if features.len() != self.qubits() {
            return Err(VqcError::FeatureCount {
                expected: self.qubits(),
                got: features.len(),
            });
        }
        let mut c = Circuit::new(self.qubits())?;
        c.extend(Encoder::for_kind(self.encoder).encode(features)?)?;
        c.extend(self.ansatz.gates(&self.params)?)?;
        Ok(c)
    }

    /// `<Z>` of qubit 0, exact or shot-estimated.
    pub fn forward(&self, features: &[f64], exec: Execution) -> Result<f64, VqcError> {
        let c = self.circuit(features)?;
        let m = MeasurementSpec::sampled(Observable::ZExpectation(0), exec.shots, exec.seed);
        Ok(crate::qsim::run(&c, &m)?)
    }

    /// `sign(forward + bias)`, with zero counted as `+1`.
    pub fn predict(&self, features: &[f64], exec: Execution) -> Result<i8, VqcError> {
        Ok(decide(self.forward(features, exec)?, self.bias))
    }

    /// Copy with parameters and bias taken from one flat vector.
    fn with_flat(&self, flat: &[f64]) -> Self {
        let (p, b) = flat.split_at(flat.len() - 1);
        Self {
            params: p.to_vec(),
            bias: b[0],
            ..self.clone()
        }
    }

    fn flat(&self) -> Vec<f64> {
        let mut v = self.params.clone();
        v.push(self.bias);
        v
    }
}

/// Decision rule shared by every model.
pub fn decide(forward: f64, bias: f64) -> i8 {
    if forward + bias >= 0.0 {
        1
    } else {
        -1
    }
}

fn labels(data: &FeatureMatrix) -> Result<&[i8], VqcError> {
    if data.is_empty() {
        return Err(VqcError::EmptyDataset);
    }
    data.labels().ok_or(VqcError::Unlabeled)
}

/// Per-example execution: each row gets its own derived shot seed.
fn row_exec(exec: Execution, i: usize) -> Execution {
    Execution {
        shots: exec.shots,
        seed: derive_seed(exec.seed, &[i as u64]),
    }
}

/// Mean of `(forward(x) + bias - y)^2` over the dataset.
pub fn mse_loss(model: &VqcModel, data: &FeatureMatrix, exec: Execution) -> Result<f64, VqcError> {
    let y = labels(data)?;
    let mut sum = 0.0;
    for (i, x) in data.iter_rows().enumerate() {
        let r = model.forward(x, row_exec(exec, i))? + model.bias - y[i] as f64;
        sum += r * r;
    }
    Ok(sum / data.rows() as f64)
}

/// Fraction of rows whose prediction equals the label.
pub fn accuracy(model: &VqcModel, data: &FeatureMatrix, exec: Execution) -> Result<f64, VqcError> {
    let y = labels(data)?;
    let mut hits = 0usize;
    for (i, x) in data.iter_rows().enumerate() {
        hits += (model.predict(x, row_exec(exec, i))? == y[i]) as usize;
    }
    Ok(hits as f64 / data.rows() as f64)
}

/// Counts of a binary confusion matrix with `+1` as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn record(&mut self, predicted: i8, actual: i8) {
        match (predicted, actual) {
            (1, 1) => self.tp += 1,
            (1, _) => self.fp += 1,
            (_, 1) => self.fn_ += 1,
            _ => self.tn += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn merge(&mut self, o: &Confusion) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.tn += o.tn;
        self.fn_ += o.fn_;
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn confusion(model: &VqcModel, data: &FeatureMatrix, exec: Execution) -> Result<Confusion, VqcError> {
    let y = labels(data)?;
    let mut c = Confusion::default();
    for (i, x) in data.iter_rows().enumerate() {
        c.record(model.predict(x, row_exec(exec, i))?, y[i]);
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerConfig,
    pub exec: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig::default(),
            exec: Execution { shots: 1000, seed: 0 },
        }
    }
}

/// Relative closeness to the final loss that counts as converged.
pub const CONVERGENCE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Training loss evaluated at each optimizer iteration.
    pub train_loss: Vec<f64>,
    /// Best training loss seen up to each iteration.
    pub best_train_loss: Vec<f64>,
    /// Validation loss of the incumbent parameters at each iteration.
    pub val_loss: Vec<f64>,
    pub iterations: usize,
    /// First iteration whose best loss is within [`CONVERGENCE_FRACTION`] of
    /// the total improvement from the final best loss.
    pub converged_at: usize,
    pub termination: Termination,
    pub rejected_evaluations: usize,
    pub final_train_loss: f64,
    pub final_val_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    /// Filled in by callers that own a clock.
    pub wall_time_ms: Option<f64>,
}

/// Iteration at which a best-so-far curve settles near its final value.
pub fn convergence_iteration(best: &[f64]) -> usize {
    let (Some(&first), Some(&last)) = (best.first(), best.last()) else {
        return 0;
    };
    let band = CONVERGENCE_FRACTION * (first - last).abs();
    best.iter().position(|&b| b - last <= band).unwrap_or(0)
}

/// Minimizes training MSE over ansatz parameters and bias.
///
/// Shot-mode evaluations draw fresh seeds per iteration and example from
/// the optimizer seed. The incumbent is re-scored on the validation set only
/// when it improves. The returned model holds the best parameters seen.
pub fn train(
    model: &VqcModel,
    train_set: &FeatureMatrix,
    val_set: &FeatureMatrix,
    cfg: &TrainConfig,
) -> Result<(VqcModel, TrainReport), VqcError> {
    labels(train_set)?;
    labels(val_set)?;
    for d in [train_set, val_set] {
        if d.cols() != model.qubits() {
            return Err(VqcError::FeatureCount {
                expected: model.qubits(),
                got: d.cols(),
            });
        }
    }
    let mut opt = cfg.optimizer.clone();
    opt.seed = derive_seed(cfg.optimizer.seed, &[cfg.exec.seed]);
    let exec_for = |seed: u64| Execution {
        shots: cfg.exec.shots,
        seed,
    };
    let mut failure: Option<VqcError> = None;
    let mut val_loss = Vec::new();
    let mut val_failure: Option<VqcError> = None;
    let mut current_val = f64::NAN;
    let mut eval_index = 0u64;
    let result = minimize_observed(
        |flat, seed| match mse_loss(&model.with_flat(flat), train_set, exec_for(seed)) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        &model.flat(),
        &opt,
        |p| {
            if p.improved {
                let seed = derive_seed(cfg.exec.seed, &[u64::MAX, eval_index]);
                match mse_loss(&model.with_flat(p.x), val_set, exec_for(seed)) {
                    Ok(v) => current_val = v,
                    Err(e) => {
                        val_failure.get_or_insert(e);
                    }
                }
            }
            eval_index += 1;
            val_loss.push(current_val);
        },
    )?;
    if let Some(e) = failure.or(val_failure) {
        if result.trajectory.is_empty() {
            return Err(e);
        }
    }
    let best = model.with_flat(&result.x);
    let final_exec = exec_for(derive_seed(cfg.exec.seed, &[u64::MAX - 1]));
    let best_train_loss = result.best_so_far();
    let report = TrainReport {
        converged_at: convergence_iteration(&best_train_loss),
        iterations: result.trajectory.len(),
        termination: result.termination,
        rejected_evaluations: result.rejected,
        final_train_loss: result.fun,
        final_val_loss: val_loss.last().copied().unwrap_or(f64::NAN),
        train_accuracy: accuracy(&best, train_set, final_exec)?,
        val_accuracy: accuracy(&best, val_set, final_exec)?,
        train_loss: result.trajectory,
        best_train_loss,
        val_loss,
        wall_time_ms: None,
    };
    Ok((best, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn labelled(rows: &[Vec<f64>], y: &[i8]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows, Some(y.to_vec())).unwrap()
    }

    #[test]
    fn parameter_counts() {
        let count = |k, n, l| Ansatz::new(k, n, l).unwrap().param_count();
        assert_eq!(count(AnsatzKind::StronglyEntangling, 4, 3), 36);
        assert_eq!(count(AnsatzKind::BasicEntangling, 4, 3), 12);
        assert_eq!(count(AnsatzKind::FixedTopology, 4, 3), 12);
        assert_eq!(
            Ansatz::new(AnsatzKind::BasicEntangling, 0, 3),
            Err(VqcError::EmptyAnsatz)
        );
    }

    #[test]
    fn skip_connection_targets() {
        let l0: Vec<_> = Ansatz::skip_cnots(4, 0).collect();
        assert!(l0.contains(&(0, 1)));
        assert!(l0.contains(&(3, 0)));
        let l1: Vec<_> = Ansatz::skip_cnots(4, 1).collect();
        assert!(l1.contains(&(0, 2)));
        assert_eq!(Ansatz::skip_cnots(4, 3).count(), 0);
        assert_eq!(Ansatz::skip_cnots(1, 0).count(), 0);
    }

    #[test]
    fn fixed_topology_layer_order() {
        let a = Ansatz::new(AnsatzKind::FixedTopology, 4, 1).unwrap();
        let g = a.gates(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let cnot = |control, target| Gate::Cnot { control, target };
        assert_eq!(&g[..3], &[cnot(0, 1), cnot(2, 3), cnot(1, 2)]);
        assert_eq!(g[3], Gate::Ry(0, 0.1));
        assert_eq!(g.len(), 7);
        assert!(matches!(a.gates(&[0.0]), Err(VqcError::ParamCount { .. })));
    }

    #[test]
    fn fixed_topology_rejects_phase_encoding() {
        let a = Ansatz::new(AnsatzKind::FixedTopology, 4, 3).unwrap();
        assert_eq!(
            VqcModel::new(a, EncoderKind::PhaseHrz, vec![0.0; 12], 0.0),
            Err(VqcError::IncompatibleEncoding(EncoderKind::PhaseHrz))
        );
    }

    #[test]
    fn forward_examples() {
        let a = Ansatz::new(AnsatzKind::FixedTopology, 4, 3).unwrap();
        let m = VqcModel::new(a, EncoderKind::AngleRy, vec![0.0; 12], 0.0).unwrap();
        let z = m.forward(&[0.0; 4], Execution::exact()).unwrap();
        assert!((z - 1.0).abs() < 1e-12);
        assert_eq!(m.predict(&[0.0; 4], Execution::exact()).unwrap(), 1);
        assert!(matches!(
            m.forward(&[0.0, 0.0, 0.0, 4.0], Execution::exact()),
            Err(VqcError::Encoding(ProtocolError::OutOfRange { .. }))
        ));
        assert!(matches!(
            m.forward(&[0.0; 3], Execution::exact()),
            Err(VqcError::FeatureCount { .. })
        ));

        let b = Ansatz::new(AnsatzKind::BasicEntangling, 4, 2).unwrap();
        let m = VqcModel::new(b, EncoderKind::PhaseHrz, vec![0.0; 8], 0.0).unwrap();
        let z = m.forward(&[0.3, 1.0, 2.0, 3.0], Execution::exact()).unwrap();
        assert!(z.abs() <= 1.0);
    }

    #[test]
    fn decision_rule() {
        assert_eq!(decide(0.6, 0.0), 1);
        assert_eq!(decide(0.2, -0.5), -1);
        assert_eq!(decide(0.5, -0.5), 1);
    }

    #[test]
    fn mse_examples() {
        // One qubit, RY(x) then basic layer RY(0): <Z> = cos(x).
        let a = Ansatz::new(AnsatzKind::BasicEntangling, 1, 1).unwrap();
        let m = VqcModel::new(a, EncoderKind::AngleRy, vec![0.0], 0.0).unwrap();
        let pi = core::f64::consts::PI;
        let exact = Execution::exact();
        let d = labelled(&[vec![0.0], vec![pi]], &[1, -1]);
        assert!(mse_loss(&m, &d, exact).unwrap() < 1e-20);

        let d = labelled(&[vec![pi / 2.0]], &[1]);
        assert!((mse_loss(&m, &d, exact).unwrap() - 1.0).abs() < 1e-12);

        // Residuals +1 and -1.
        let d = labelled(&[vec![pi / 2.0], vec![pi / 2.0]], &[-1, 1]);
        assert!((mse_loss(&m, &d, exact).unwrap() - 1.0).abs() < 1e-12);

        let empty = FeatureMatrix::new(0, 1, vec![], Some(vec![])).unwrap();
        assert_eq!(mse_loss(&m, &empty, exact), Err(VqcError::EmptyDataset));
    }

    #[test]
    fn single_point_training_approaches_target() {
        let a = Ansatz::new(AnsatzKind::BasicEntangling, 2, 1).unwrap();
        let m = VqcModel::init(a, EncoderKind::AngleRy, 1).unwrap();
        let d = labelled(&[vec![1.0, 2.0], vec![1.0, 2.0]], &[-1, -1]);
        let cfg = TrainConfig {
            exec: Execution::exact(),
            ..TrainConfig::default()
        };
        let (best, rep) = train(&m, &d, &d, &cfg).unwrap();
        assert!(rep.best_train_loss.windows(2).all(|w| w[1] <= w[0]));
        assert!(rep.final_train_loss < 1e-4);
        assert_eq!(rep.train_loss.len(), rep.val_loss.len());
        assert_eq!(rep.iterations, rep.train_loss.len());
        assert_eq!(best.predict(&[1.0, 2.0], Execution::exact()).unwrap(), -1);
        assert_eq!(rep.train_accuracy, 1.0);
    }

    #[test]
    fn convergence_index() {
        assert_eq!(convergence_iteration(&[10.0, 5.0, 1.05, 1.0]), 2);
        assert_eq!(convergence_iteration(&[]), 0);
        assert_eq!(convergence_iteration(&[3.0, 3.0]), 0);
    }

    #[test]
    fn confusion_counts() {
        let mut c = Confusion::default();
        c.record(1, 1);
        c.record(1, -1);
        c.record(-1, 1);
        c.record(-1, -1);
        c.record(-1, -1);
        assert_eq!((c.tp, c.fp, c.fn_, c.tn), (1, 1, 1, 2));
        assert!((c.recall() - 0.5).abs() < 1e-15);
        assert!((c.accuracy() - 0.6).abs() < 1e-15);
    }
}
