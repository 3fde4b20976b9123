//! SAGA-variance-reduced stochastic gradient descent for locating the
//! approximate mode `x*` that the control-variate samplers center on.

use alloc::vec;
use alloc::vec::Vec;

use crate::estimators::{SagaState, draw_batch};
use crate::math;
use crate::potentials::{GradOracle, SumPotential};
use crate::rng::{StreamRng, StreamRole};

/// Result of a mode search.
#[derive(Clone, Debug)]
pub struct ModeResult {
    pub x_star: Vec<f64>,
    /// `||∇f(x_star)||` at the returned point.
    pub grad_norm: f64,
    pub iterations: usize,
    /// True when `grad_norm` met the tolerance.
    pub converged: bool,
    /// True when the iterate escaped (`||x|| > 1e12`).
    pub diverged: bool,
    /// Component-gradient queries spent, convergence checks included.
    pub gradient_queries: u64,
}

/// Options for [`saga_sgd_minimize`]. The defaults follow the scale of the
/// problem: step `1/(2M)` when constants are available (else 1e-3),
/// tolerance `1e-6·(1 + ||∇f(x_init)||)`, and a convergence check once per
/// effective data pass (`⌈N/n⌉` steps).
#[derive(Clone, Debug, Default)]
pub struct ModeOptions {
    pub step: Option<f64>,
    pub batch_size: usize,
    pub max_iters: usize,
    pub tolerance: Option<f64>,
    pub check_every: Option<usize>,
    pub seed: u64,
    pub init: Option<Vec<f64>>,
}

impl ModeOptions {
    pub fn new(batch_size: usize, max_iters: usize, seed: u64) -> Self {
        Self {
            step: None,
            batch_size,
            max_iters,
            tolerance: None,
            check_every: None,
            seed,
            init: None,
        }
    }
}

/// Minimizes `f` by plain SGD driven by the SAGA estimator:
/// `x ← x - step · g_saga(x)`.
///
/// Deterministic given the seed. Divergence (`||x|| > 1e12`) ends the run
/// with a non-converged result rather than an error so callers can retry
/// with a smaller step.
pub fn saga_sgd_minimize<P: SumPotential + ?Sized>(
    potential: &P,
    opts: &ModeOptions,
) -> ModeResult {
    assert!(opts.batch_size >= 1, "batch size must be at least 1");
    let d = potential.dim();
    let n = potential.num_components();
    let mut oracle = GradOracle::new(potential);
    let mut rng = StreamRng::derive(opts.seed, 0, StreamRole::Optimizer);

    let step = opts.step.unwrap_or_else(|| match potential.constants() {
        Ok(c) => 0.5 / c.smoothness,
        Err(_) => 1e-3,
    });
    assert!(step > 0.0, "step must be positive");
    let check_every = opts
        .check_every
        .unwrap_or_else(|| n.div_ceil(opts.batch_size))
        .max(1);

    let mut x = opts.init.clone().unwrap_or_else(|| vec![0.0; d]);
    assert_eq!(x.len(), d, "initial point dimension mismatch");

    let mut grad = vec![0.0; d];
    oracle.grad_full_into(&x, &mut grad);
    let tolerance = opts
        .tolerance
        .unwrap_or_else(|| 1e-6 * (1.0 + math::norm(&grad)));
    let mut grad_norm = math::norm(&grad);
    if grad_norm <= tolerance {
        return ModeResult {
            x_star: x,
            grad_norm,
            iterations: 0,
            converged: true,
            diverged: false,
            gradient_queries: oracle.component_queries(),
        };
    }

    let mut saga = SagaState::new(&mut oracle, &x);
    let mut estimate = vec![0.0; d];
    let mut converged = false;
    let mut diverged = false;
    let mut iterations = 0;

    for k in 1..=opts.max_iters {
        let batch = draw_batch(n, opts.batch_size, &mut rng);
        saga.estimate_and_update(&mut oracle, &x, &batch, &mut estimate);
        for (xi, &g) in x.iter_mut().zip(&estimate) {
            *xi -= step * g;
        }
        iterations = k;

        let norm_sq = math::hypot_sq(&x);
        if !norm_sq.is_finite() || norm_sq > 1e24 {
            diverged = true;
            break;
        }
        if k % check_every == 0 || k == opts.max_iters {
            oracle.grad_full_into(&x, &mut grad);
            grad_norm = math::norm(&grad);
            if grad_norm <= tolerance {
                converged = true;
                break;
            }
        }
    }

    ModeResult {
        x_star: x,
        grad_norm,
        iterations,
        converged,
        diverged,
        gradient_queries: oracle.component_queries(),
    }
}
