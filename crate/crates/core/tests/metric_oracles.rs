//! Metric-space properties of the W2 implementations and the agreement
//! between the empirical and closed-form routes on Gaussian data.

use proptest::prelude::*;
use vrlmc_core::metrics::{GaussianSummary, w2_empirical_1d, w2_gaussian};
use vrlmc_core::rng::StreamRng;

fn random_summary(rng: &mut StreamRng, dim: usize) -> GaussianSummary {
    let mean: Vec<f64> = (0..dim).map(|_| 2.0 * rng.standard_normal()).collect();
    // A = random matrix, covariance = AAᵀ + εI (PSD by construction).
    let a: Vec<f64> = (0..dim * dim).map(|_| rng.standard_normal()).collect();
    let mut cov = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            let mut s = 0.0;
            for k in 0..dim {
                s += a[i * dim + k] * a[j * dim + k];
            }
            cov[i * dim + j] = s + if i == j { 0.05 } else { 0.0 };
        }
    }
    GaussianSummary::new(mean, cov)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gaussian_w2_triangle_inequality(seed in 0u64..100_000) {
        let mut rng = StreamRng::from_seed(seed);
        let a = random_summary(&mut rng, 3);
        let b = random_summary(&mut rng, 3);
        let c = random_summary(&mut rng, 3);
        let ab = w2_gaussian(&a, &b).unwrap();
        let ac = w2_gaussian(&a, &c).unwrap();
        let cb = w2_gaussian(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-8, "{ab} > {ac} + {cb}");
        prop_assert!(w2_gaussian(&a, &a).unwrap() < 1e-9);
    }

    #[test]
    fn empirical_w2_triangle_inequality(seed in 0u64..100_000, len in 1usize..60) {
        let mut rng = StreamRng::from_seed(seed);
        let draw = |rng: &mut StreamRng| -> Vec<f64> {
            let shift = rng.standard_normal();
            (0..len).map(|_| shift + rng.standard_normal()).collect()
        };
        let a = draw(&mut rng);
        let b = draw(&mut rng);
        let c = draw(&mut rng);
        let ab = w2_empirical_1d(&a, &b).unwrap();
        let ac = w2_empirical_1d(&a, &c).unwrap();
        let cb = w2_empirical_1d(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-9);
    }
}

#[test]
fn empirical_w2_converges_to_gaussian_closed_form() {
    // Two known 1-D Gaussians, 1e5 samples each: the empirical coupling
    // must land within 5% of the closed form.
    let (mu_a, sd_a) = (0.3, 1.0);
    let (mu_b, sd_b) = (-1.1, 1.7);
    let closed = w2_gaussian(
        &GaussianSummary::new(vec![mu_a], vec![sd_a * sd_a]),
        &GaussianSummary::new(vec![mu_b], vec![sd_b * sd_b]),
    )
    .unwrap();

    let n = 100_000;
    let mut rng = StreamRng::from_seed(1213);
    let a: Vec<f64> = (0..n).map(|_| mu_a + sd_a * rng.standard_normal()).collect();
    let b: Vec<f64> = (0..n).map(|_| mu_b + sd_b * rng.standard_normal()).collect();
    let empirical = w2_empirical_1d(&a, &b).unwrap();
    assert!(
        (empirical - closed).abs() < 0.05 * closed,
        "empirical {empirical} vs closed form {closed}"
    );
}

#[test]
fn gaussian_w2_brute_force_check_in_2d() {
    // Independent oracle for one full-covariance case: diagonalizable by
    // hand since both covariances share an eigenbasis (rotation by 45°).
    let r = std::f64::consts::FRAC_1_SQRT_2;
    // Eigenvalues (2, 0.5) and (1, 0.25) in the shared rotated basis.
    let cov_from_eigs = |l1: f64, l2: f64| {
        // V·diag(l)·Vᵀ with V = [[r, -r], [r, r]].
        vec![
            r * r * (l1 + l2),
            r * r * (l1 - l2),
            r * r * (l1 - l2),
            r * r * (l1 + l2),
        ]
    };
    let a = GaussianSummary::new(vec![0.0, 0.0], cov_from_eigs(2.0, 0.5));
    let b = GaussianSummary::new(vec![1.0, -1.0], cov_from_eigs(1.0, 0.25));
    // Per shared eigendirection the Bures term is (√λa - √λb)².
    let expected = (2.0f64
        + (2.0f64.sqrt() - 1.0).powi(2)
        + (0.5f64.sqrt() - 0.25f64.sqrt()).powi(2))
    .sqrt();
    let got = w2_gaussian(&a, &b).unwrap();
    assert!((got - expected).abs() < 1e-10, "{got} vs {expected}");
}
