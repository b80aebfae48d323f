use qseg_core::optim::{minimize, Algorithm, OptimizerConfig};
use qseg_core::rng::rng_from_seed;
use rand::Rng;

/// `A = M Mᵀ + I` with `M` uniform in [-1, 1]; minimum 0 at the origin.
fn random_pd(d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    let m: Vec<Vec<f64>> = (0..d)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let dot: f64 = (0..d).map(|k| m[i][k] * m[j][k]).sum();
                    dot + if i == j { 1.0 } else { 0.0 }
                })
                .collect()
        })
        .collect()
}

fn quad(a: &[Vec<f64>], x: &[f64]) -> f64 {
    a.iter()
        .zip(x)
        .map(|(row, xi)| xi * row.iter().zip(x).map(|(r, xj)| r * xj).sum::<f64>())
        .sum::<f64>()
        * 0.5
}

#[test]
fn quadratic_36d_reduced_by_99_percent() {
    let a = random_pd(36, 2024);
    let x0 = vec![1.0; 36];
    let f0 = quad(&a, &x0);
    for (alg, budget) in [(Algorithm::LinearTrustRegion, 4000), (Algorithm::NelderMead, 20000)] {
        let cfg = OptimizerConfig {
            algorithm: alg,
            max_iters: budget,
            rho_end: 1e-6,
            ..OptimizerConfig::default()
        };
        let r = minimize(|x, _| quad(&a, x), &x0, &cfg).unwrap();
        eprintln!(
            "{alg:?}: {} -> {} in {} ({:?})",
            f0,
            r.fun,
            r.trajectory.len(),
            r.termination
        );
        assert!(r.fun <= 0.01 * f0);
    }
}
