mod common;

use std::f64::consts::PI;

use common::{inner, CVec};
use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;
use qseg_core::protocols::{Encoder, EncoderKind, Protocol};

/// Closed-form product state of an encoding, built without any gates.
fn encoded_state(enc: &Encoder, values: &[f64]) -> CVec {
    let factors: Vec<[Complex64; 2]> = values
        .iter()
        .map(|&v| {
            let t = (v - enc.min) / (enc.max - enc.min) * PI;
            match enc.kind {
                EncoderKind::AngleRy => [
                    Complex64::new((t / 2.0).cos(), 0.0),
                    Complex64::new((t / 2.0).sin(), 0.0),
                ],
                EncoderKind::PhaseHrz => {
                    let h = std::f64::consts::FRAC_1_SQRT_2;
                    [Complex64::from_polar(h, -t / 2.0), Complex64::from_polar(h, t / 2.0)]
                }
            }
        })
        .collect();
    let dim = 1 << values.len();
    DVector::from_fn(dim, |i, _| {
        factors
            .iter()
            .enumerate()
            .fold(Complex64::new(1.0, 0.0), |acc, (q, f)| {
                let bit = (i >> (values.len() - 1 - q)) & 1;
                acc * f[bit]
            })
    })
}

fn encoder() -> impl Strategy<Value = Encoder> {
    prop_oneof![
        Just(Encoder::intensity()),
        Just(Encoder::angle_radians()),
        Just(Encoder::phase())
    ]
}

fn pair(enc: Encoder, max_len: usize) -> impl Strategy<Value = (Encoder, Vec<f64>, Vec<f64>)> {
    (1..=max_len).prop_flat_map(move |n| {
        (
            Just(enc),
            prop::collection::vec(enc.min..=enc.max, n),
            prop::collection::vec(enc.min..=enc.max, n),
        )
    })
}

fn any_pair() -> impl Strategy<Value = (Encoder, Vec<f64>, Vec<f64>)> {
    encoder().prop_flat_map(|e| pair(e, 3))
}

fn real_pair() -> impl Strategy<Value = (Encoder, Vec<f64>, Vec<f64>)> {
    prop_oneof![Just(Encoder::intensity()), Just(Encoder::angle_radians())].prop_flat_map(|e| pair(e, 3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn swap_test_matches_inner_product((enc, x, y) in any_pair()) {
        let r = Protocol::SwapTest.run(&x, &y, &enc, 0, 0).unwrap();
        let ov = inner(&encoded_state(&enc, &x), &encoded_state(&enc, &y)).norm_sqr();
        prop_assert!((r.raw - 0.5 * (1.0 + ov)).abs() < 1e-10);
    }

    #[test]
    fn hadamard_test_matches_real_part((enc, x, y) in any_pair()) {
        let r = Protocol::HadamardTest.run(&x, &y, &enc, 0, 0).unwrap();
        let expected = inner(&encoded_state(&enc, &y), &encoded_state(&enc, &x)).re;
        prop_assert!((r.raw - expected).abs() < 1e-10);
    }

    #[test]
    fn simple_overlap_matches_fidelity((enc, x, y) in any_pair()) {
        let r = Protocol::SimpleOverlap.run(&x, &y, &enc, 0, 0).unwrap();
        let expected = inner(&encoded_state(&enc, &y), &encoded_state(&enc, &x)).norm_sqr();
        prop_assert!((r.raw - expected).abs() < 1e-10);
    }

    #[test]
    fn hadamard_distance_is_euclidean((enc, x, y) in real_pair()) {
        let r = Protocol::HadamardTest.run(&x, &y, &enc, 0, 0).unwrap();
        let diff = encoded_state(&enc, &x) - encoded_state(&enc, &y);
        prop_assert!((2.0 - 2.0 * r.raw - diff.norm_squared()).abs() < 1e-10);
        prop_assert!((r.dsq - diff.norm_squared()).abs() < 1e-10);
    }

    #[test]
    fn protocols_agree_on_real_encodings((enc, x, y) in real_pair()) {
        let swap = Protocol::SwapTest.run(&x, &y, &enc, 0, 0).unwrap();
        let had = Protocol::HadamardTest.run(&x, &y, &enc, 0, 0).unwrap();
        let simple = Protocol::SimpleOverlap.run(&x, &y, &enc, 0, 0).unwrap();
        prop_assert!((swap.overlap - had.raw * had.raw).abs() < 1e-10);
        prop_assert!((swap.overlap - simple.raw).abs() < 1e-10);
    }

    #[test]
    fn distances_are_symmetric((enc, x, y) in any_pair()) {
        for p in Protocol::ALL {
            let a = p.run(&x, &y, &enc, 0, 0).unwrap();
            let b = p.run(&y, &x, &enc, 0, 0).unwrap();
            prop_assert!((a.dsq - b.dsq).abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn identical_inputs_have_zero_distance((enc, x, _y) in any_pair()) {
        for p in Protocol::ALL {
            let r = p.run(&x, &x, &enc, 0, 0).unwrap();
            prop_assert!(r.dsq.abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn values_outside_range_are_rejected(v in 255.001..1e6f64) {
        let enc = Encoder::intensity();
        for p in Protocol::ALL {
            prop_assert!(p.run(&[v], &[0.0], &enc, 0, 0).is_err());
        }
    }
}

#[test]
fn distance_is_strictly_monotone_in_intensity_gap() {
    let enc = Encoder::intensity();
    for p in Protocol::ALL {
        for c in [0u8, 37, 128, 200, 255] {
            let mut by_gap: Vec<(i32, f64)> = (0..=255u8)
                .map(|v| {
                    let r = p.run(&[v as f64], &[c as f64], &enc, 0, 0).unwrap();
                    ((v as i32 - c as i32).abs(), r.dsq)
                })
                .collect();
            by_gap.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for w in by_gap.windows(2) {
                if w[1].0 > w[0].0 {
                    assert!(w[1].1 > w[0].1, "{p:?} c={c}: gap {} -> {}", w[0].0, w[1].0);
                } else {
                    assert!((w[1].1 - w[0].1).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn argmin_over_centroids_matches_classical() {
    let enc = Encoder::intensity();
    let centroids = [12.0, 90.0, 171.0, 240.0];
    for p in Protocol::ALL {
        for v in 0..=255u8 {
            let v = v as f64;
            let mut gaps: Vec<f64> = centroids.iter().map(|c| (v - c).abs()).collect();
            gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if gaps[0] == gaps[1] {
                continue;
            }
            let quantum = centroids
                .iter()
                .enumerate()
                .map(|(i, &c)| (i, p.run(&[v], &[c], &enc, 0, 0).unwrap().dsq))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap()
                .0;
            let classical = centroids
                .iter()
                .enumerate()
                .min_by(|a, b| (v - a.1).abs().partial_cmp(&(v - b.1).abs()).unwrap())
                .unwrap()
                .0;
            assert_eq!(quantum, classical, "{p:?} v={v}");
        }
    }
}

#[test]
fn shot_estimates_are_unbiased() {
    let enc = Encoder::intensity();
    for p in Protocol::ALL {
        for (x, y) in [(85.0, 0.0), (10.0, 200.0), (128.0, 140.0)] {
            let exact = p.run(&[x], &[y], &enc, 0, 0).unwrap().raw;
            let draws: Vec<f64> = (0..100u64)
                .map(|s| p.run(&[x], &[y], &enc, 1000, s).unwrap().raw)
                .collect();
            let mean = draws.iter().sum::<f64>() / 100.0;
            let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / 99.0;
            let se = (var / 100.0).sqrt().max(1e-12);
            assert!(
                (mean - exact).abs() <= 3.0 * se,
                "{p:?} ({x},{y}): mean {mean} exact {exact} se {se}"
            );
        }
    }
}

#[test]
fn worked_values() {
    let enc = Encoder::intensity();
    let swap = Protocol::SwapTest.run(&[85.0], &[0.0], &enc, 0, 0).unwrap();
    assert!((swap.raw - 0.875).abs() < 1e-12);
    let had = Protocol::HadamardTest.run(&[85.0], &[0.0], &enc, 0, 0).unwrap();
    assert!((had.dsq - (2.0 - 3f64.sqrt())).abs() < 1e-12);
    let simple = Protocol::SimpleOverlap.run(&[0.0], &[255.0], &enc, 0, 0).unwrap();
    assert!((simple.dsq - 1.0).abs() < 1e-12);
}
