use std::cell::Cell;

use qseg_core::descriptors::{IMAGE_DESCRIPTOR_LEN, REGION_DESCRIPTOR_LEN};
use qseg_core::features::{FeatureMatrix, Preprocessor};
use qseg_core::imaging::{Mask, SceneConfig};
use qseg_core::pipeline::{
    generate_corpus, postfilter_regions, run_pipeline, run_segmentation, Classifier, Clock, CorpusSpec, Head,
    ModelKind, NoClock, PipelineConfig, TrainingMetadata,
};
use qseg_core::protocols::EncoderKind;
use qseg_core::rng::rng_from_seed;
use qseg_core::vqc::{Ansatz, AnsatzKind, VqcModel};
use rand::Rng;

/// Classifier whose bias swamps the circuit output, so its label is fixed
/// while the circuit still runs.
fn constant_classifier(kind: ModelKind, label: i8, seed: u64) -> Classifier {
    let d = match kind {
        ModelKind::ImageGate => IMAGE_DESCRIPTOR_LEN,
        ModelKind::SegmentFilter => REGION_DESCRIPTOR_LEN,
        ModelKind::Tabular => 6,
    };
    let mut rng = rng_from_seed(seed);
    let rows: Vec<Vec<f64>> = (0..30)
        .map(|_| (0..d).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let (preprocessor, _) = Preprocessor::fit(&FeatureMatrix::from_rows(&rows, None).unwrap(), 4).unwrap();
    let ansatz = Ansatz::new(AnsatzKind::BasicEntangling, 4, 2).unwrap();
    let mut model = VqcModel::init(ansatz, EncoderKind::AngleRy, seed).unwrap();
    model.bias = 5.0 * label as f64;
    Classifier {
        kind,
        preprocessor,
        head: Head::Quantum(model),
        metadata: TrainingMetadata::default(),
    }
}

/// Advances by one millisecond per reading and counts readings.
#[derive(Default)]
struct CountingClock {
    ticks: Cell<u64>,
}

impl Clock for CountingClock {
    fn now_ms(&self) -> f64 {
        let t = self.ticks.get();
        self.ticks.set(t + 1);
        t as f64
    }
}

fn corpus(images: usize, seed: u64) -> Vec<qseg_core::pipeline::Sample> {
    generate_corpus(&CorpusSpec {
        images,
        crack_fraction: 1.0,
        scene: SceneConfig::default(),
        seed,
    })
}

#[test]
fn rejected_images_skip_every_later_stage() {
    let gate = constant_classifier(ModelKind::ImageGate, -1, 1);
    let seg = constant_classifier(ModelKind::SegmentFilter, 1, 2);
    let clock = CountingClock::default();
    for s in corpus(3, 5) {
        let r = run_pipeline(&s.image, &gate, &seg, &PipelineConfig::exact(), Some(&s.mask), &clock).unwrap();
        assert!(r.early_exit);
        assert_eq!(r.gate, -1);
        assert!(r.clusters.is_none());
        assert!(r.regions.is_empty() && r.mask.is_empty() && r.candidates.is_empty());
        assert_eq!(r.timings.segmentation_ms, 0.0);
        assert_eq!(r.timings.regions_ms, 0.0);
        assert_eq!(r.timings.classification_ms, 0.0);
        assert!(r.timings.preprocess_ms > 0.0 && r.timings.gate_ms > 0.0);
        assert_eq!(r.iou, Some(0.0));
    }
}

#[test]
fn accepted_images_record_every_stage() {
    let gate = constant_classifier(ModelKind::ImageGate, 1, 1);
    let seg = constant_classifier(ModelKind::SegmentFilter, 1, 2);
    let s = &corpus(1, 6)[0];
    let r = run_pipeline(
        &s.image,
        &gate,
        &seg,
        &PipelineConfig::exact(),
        Some(&s.mask),
        &CountingClock::default(),
    )
    .unwrap();
    assert!(!r.early_exit);
    let t = r.timings;
    assert!(t.segmentation_ms > 0.0 && t.regions_ms > 0.0 && t.classification_ms > 0.0);
    assert!(t.total_ms >= t.preprocess_ms + t.gate_ms + t.segmentation_ms + t.regions_ms + t.classification_ms);
}

#[test]
fn final_mask_comes_from_surviving_regions() {
    let gate = constant_classifier(ModelKind::ImageGate, 1, 1);
    for (label, threshold) in [(1, 0.0), (1, 2.5), (1, 1e9), (-1, 2.5)] {
        let seg = constant_classifier(ModelKind::SegmentFilter, label, 3);
        let cfg = PipelineConfig {
            aspect_threshold: threshold,
            ..PipelineConfig::exact()
        };
        let blobs = generate_corpus(&CorpusSpec {
            images: 4,
            crack_fraction: 0.5,
            scene: SceneConfig::square_blobs(),
            seed: 8,
        });
        for s in &blobs {
            let r = run_pipeline(&s.image, &gate, &seg, &cfg, Some(&s.mask), &NoClock).unwrap();
            assert!(r.mask.is_subset_of(&r.candidates));
            let mut rebuilt = Mask::empty(r.mask.width(), r.mask.height());
            for d in &r.regions {
                assert_eq!(d.classified, label);
                assert_eq!(d.demoted, label == 1 && threshold > 0.0 && d.aspect_ratio < threshold);
                assert_eq!(d.label == 1, d.classified == 1 && !d.demoted);
                if d.label == 1 {
                    d.pixels.iter().for_each(|&(x, y)| rebuilt.set(x, y, true));
                }
            }
            assert_eq!(rebuilt, r.mask);
            if label == -1 || threshold == 1e9 {
                assert!(r.mask.is_empty());
            }
        }
    }
}

#[test]
fn identical_runs_are_identical() {
    let gate = constant_classifier(ModelKind::ImageGate, 1, 1);
    let seg = constant_classifier(ModelKind::SegmentFilter, 1, 2);
    let cfg = PipelineConfig {
        seed: 99,
        ..PipelineConfig::default()
    };
    for s in corpus(2, 9) {
        let a = run_pipeline(&s.image, &gate, &seg, &cfg, Some(&s.mask), &NoClock).unwrap();
        let b = run_pipeline(&s.image, &gate, &seg, &cfg, Some(&s.mask), &NoClock).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn mismatched_models_are_rejected() {
    let gate = constant_classifier(ModelKind::ImageGate, 1, 1);
    let seg = constant_classifier(ModelKind::SegmentFilter, 1, 2);
    let s = &corpus(1, 1)[0];
    let cfg = PipelineConfig::exact();
    assert!(run_pipeline(&s.image, &seg, &gate, &cfg, None, &NoClock).is_err());
    let wrong_truth = Mask::empty(3, 3);
    assert!(run_pipeline(&s.image, &gate, &seg, &cfg, Some(&wrong_truth), &NoClock).is_err());
}

#[test]
fn zero_threshold_disables_filter() {
    let gate = constant_classifier(ModelKind::ImageGate, 1, 1);
    let seg = constant_classifier(ModelKind::SegmentFilter, 1, 2);
    let s = &corpus(1, 4)[0];
    let mut r = run_pipeline(
        &s.image,
        &gate,
        &seg,
        &PipelineConfig {
            aspect_threshold: 0.0,
            ..PipelineConfig::exact()
        },
        None,
        &NoClock,
    )
    .unwrap();
    assert!(r.regions.iter().all(|d| !d.demoted));
    assert_eq!(postfilter_regions(&mut r.regions, 0.0), 0);
}

#[test]
fn segmentation_without_gate_matches_a_passing_gate() {
    let pass = constant_classifier(ModelKind::ImageGate, 1, 1);
    let reject = constant_classifier(ModelKind::ImageGate, -1, 1);
    let seg = constant_classifier(ModelKind::SegmentFilter, 1, 2);
    let cfg = PipelineConfig::exact();
    for s in corpus(3, 8) {
        let gated = run_pipeline(&s.image, &pass, &seg, &cfg, Some(&s.mask), &NoClock).unwrap();
        let ungated = run_segmentation(&s.image, &seg, &cfg, Some(&s.mask), &NoClock).unwrap();
        assert_eq!(gated.mask, ungated.mask);
        assert_eq!(gated.regions, ungated.regions);
        assert_eq!(gated.iou, ungated.iou);
        assert!(ungated.gate_score.is_nan());
        assert!(
            run_pipeline(&s.image, &reject, &seg, &cfg, None, &NoClock)
                .unwrap()
                .early_exit
        );
    }
    assert!(run_segmentation(&corpus(1, 1)[0].image, &pass, &cfg, None, &NoClock).is_err());
}

#[test]
fn tabular_models_accept_any_width() {
    let c = constant_classifier(ModelKind::Tabular, 1, 4);
    assert!(c.validate().is_ok());
    assert_eq!(c.predict(&[0.5; 6], Default::default()).unwrap(), 1);
    assert!(c.score(&[0.5; 5], Default::default()).is_err());
}
