//! Structural properties of the theorem bounds: monotonicity in the
//! horizon and step size, variance-term decay toward the full-gradient
//! regime, and regime-threshold ordering.

use proptest::prelude::*;
use vrlmc_core::theory::{
    BoundInputs, SvrgBoundOption, cvuld_bound, regime_classify, saga_bound, sgld_bound,
    svrg_bound,
};

fn inputs(step: f64, iters: f64, batch: usize) -> BoundInputs {
    BoundInputs {
        dim: 5,
        data_size: 500,
        strong_convexity: 2.0,
        smoothness: 8.0,
        hessian_lipschitz: 1.5,
        step_size: step,
        iterations: iters,
        batch_size: batch,
        epoch_length: Some(400),
        noise_scale: Some(0.8),
        w2_init: 2.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bounds_monotone_nonincreasing_in_iterations(
        step in 1e-6f64..1e-3,
        t1 in 10.0f64..1e5,
        factor in 1.0f64..100.0,
        batch in 9usize..64,
    ) {
        let a = inputs(step, t1, batch);
        let b = inputs(step, t1 * factor, batch);
        prop_assert!(sgld_bound(&b).unwrap() <= sgld_bound(&a).unwrap() + 1e-12);
        prop_assert!(saga_bound(&b).value <= saga_bound(&a).value + 1e-12);
        prop_assert!(
            svrg_bound(&b, SvrgBoundOption::I).unwrap().value
                <= svrg_bound(&a, SvrgBoundOption::I).unwrap().value + 1e-12
        );
        prop_assert!(
            svrg_bound(&b, SvrgBoundOption::II).unwrap().value
                <= svrg_bound(&a, SvrgBoundOption::II).unwrap().value + 1e-12
        );
        prop_assert!(cvuld_bound(&b).value <= cvuld_bound(&a).value + 1e-12);
    }

    #[test]
    fn bias_terms_nondecreasing_in_step_size(
        step in 1e-6f64..1e-3,
        factor in 1.0f64..50.0,
        batch in 9usize..64,
    ) {
        // Kill the transient so only the δ-driven terms remain.
        let a = inputs(step, 1e18, batch);
        let b = inputs(step * factor, 1e18, batch);
        prop_assert!(sgld_bound(&b).unwrap() >= sgld_bound(&a).unwrap() - 1e-12);
        prop_assert!(saga_bound(&b).value >= saga_bound(&a).value - 1e-12);
        prop_assert!(
            svrg_bound(&b, SvrgBoundOption::I).unwrap().value
                >= svrg_bound(&a, SvrgBoundOption::I).unwrap().value - 1e-12
        );
        prop_assert!(
            svrg_bound(&b, SvrgBoundOption::II).unwrap().value
                >= svrg_bound(&a, SvrgBoundOption::II).unwrap().value - 1e-12
        );
        prop_assert!(cvuld_bound(&b).value >= cvuld_bound(&a).value - 1e-12);
    }

    #[test]
    fn variance_terms_shrink_toward_full_batch(step in 1e-6f64..1e-4) {
        // Fixing δ and growing n → N must shrink the batch-driven term
        // (1/n for SAGA, 1/√n for SVRG-I and CV-ULD).
        let small = inputs(step, 1e18, 10);
        let large = inputs(step, 1e18, 500);
        let saga_small = saga_bound(&small).value;
        let saga_large = saga_bound(&large).value;
        prop_assert!(saga_large < saga_small);

        let svrg_small = svrg_bound(&small, SvrgBoundOption::I).unwrap().value;
        let svrg_large = svrg_bound(&large, SvrgBoundOption::I).unwrap().value;
        prop_assert!(svrg_large < svrg_small);

        let cv_small = cvuld_bound(&small).value;
        let cv_large = cvuld_bound(&large).value;
        prop_assert!(cv_large < cv_small);

        // Exact decay rates of the variance terms alone.
        let bias = |b: &BoundInputs| {
            2.0 * b.step_size * b.hessian_lipschitz * b.dim as f64 / b.strong_convexity
                + 2.0 * b.step_size * b.smoothness.powf(1.5) * (b.dim as f64).sqrt()
                    / b.strong_convexity
        };
        let saga_var_small = saga_small - bias(&small);
        let saga_var_large = saga_large - bias(&large);
        prop_assert!(
            (saga_var_small / saga_var_large - 50.0).abs() < 1e-6,
            "SAGA variance term must scale as 1/n"
        );
    }

    #[test]
    fn regime_thresholds_ordered(d in 1usize..100, n in 2usize..10_000_000) {
        let sqrt_d = (d as f64).sqrt();
        let big_n = n as f64;
        let lo = sqrt_d / big_n;
        let mid = sqrt_d / big_n.powf(5.0 / 6.0);
        let hi = sqrt_d / big_n.sqrt();
        prop_assert!(lo < mid && mid < hi);
        // The classifier honors the same ordering.
        use vrlmc_core::theory::Regime;
        prop_assert_eq!(regime_classify(d, n, hi * 1.01), Regime::Sgld);
        if mid * 1.01 < hi * 0.99 {
            prop_assert_eq!(regime_classify(d, n, mid * 1.01), Regime::Comparable);
        }
        prop_assert_eq!(regime_classify(d, n, mid * 0.5), Regime::SagaLd);
    }
}
