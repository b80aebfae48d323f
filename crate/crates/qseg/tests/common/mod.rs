#![allow(dead_code)]

use qseg_core::features::{PcaModel, Preprocessor, Scaler};
use qseg_core::pipeline::{Classifier, Head, ModelKind, TrainingMetadata};
use qseg_core::protocols::EncoderKind;
use qseg_core::vqc::{Ansatz, AnsatzKind, VqcModel};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Any finite double, drawn from the raw bit patterns so subnormals,
/// signed zeros and extreme exponents all show up.
pub fn any_finite(rng: &mut StdRng) -> f64 {
    loop {
        let v = f64::from_bits(rng.random());
        if v.is_finite() {
            return v;
        }
    }
}

fn vec(rng: &mut StdRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| any_finite(rng)).collect()
}

/// A structurally valid classifier filled with arbitrary finite numbers.
pub fn random_classifier(seed: u64) -> Classifier {
    let mut rng = StdRng::seed_from_u64(seed);
    let kind = [ModelKind::ImageGate, ModelKind::SegmentFilter, ModelKind::Tabular][rng.random_range(0..3)];
    let d_in = kind.descriptor_len().unwrap_or_else(|| rng.random_range(1..9));
    let d_out = rng.random_range(1..=d_in.min(5));
    let pca = PcaModel {
        mean: vec(&mut rng, d_in),
        components: (0..d_out).map(|_| vec(&mut rng, d_in)).collect(),
        explained_variance: vec(&mut rng, d_out),
        total_variance: any_finite(&mut rng),
        rank_deficient: rng.random(),
    };
    let scaler = Scaler {
        min: vec(&mut rng, d_out),
        max: vec(&mut rng, d_out),
    };
    let head = if rng.random_bool(0.7) {
        let ansatz_kind = AnsatzKind::ALL[rng.random_range(0..3)];
        let encoder = if ansatz_kind == AnsatzKind::FixedTopology || rng.random() {
            EncoderKind::AngleRy
        } else {
            EncoderKind::PhaseHrz
        };
        let ansatz = Ansatz::new(ansatz_kind, d_out, rng.random_range(1..5)).unwrap();
        let params = vec(&mut rng, ansatz.param_count());
        Head::Quantum(VqcModel::new(ansatz, encoder, params, any_finite(&mut rng)).unwrap())
    } else {
        Head::Classical(qseg_core::baseline::LogisticModel {
            weights: vec(&mut rng, d_out),
            bias: any_finite(&mut rng),
        })
    };
    Classifier {
        kind,
        preprocessor: Preprocessor { pca, scaler },
        head,
        metadata: TrainingMetadata {
            seed: rng.random(),
            shots: rng.random(),
            iterations: rng.random_range(0..10_000),
            converged_at: rng.random_range(0..10_000),
            train_rows: rng.random_range(0..10_000),
            final_train_loss: any_finite(&mut rng),
            train_accuracy: rng.random(),
            val_accuracy: rng.random(),
            test_accuracy: rng.random(),
        },
    }
}

/// Equal as values and in every bit: `Debug` prints the shortest
/// round-trip form of each float, so it separates `0.0` from `-0.0`.
pub fn bit_identical(a: &Classifier, b: &Classifier) -> bool {
    a == b && format!("{a:?}") == format!("{b:?}")
}
