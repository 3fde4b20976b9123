//! Executable forms of the convergence guarantees: the SGLD Wasserstein
//! bound, the SAGA/SVRG/CV-ULD theorem bounds, per-method mixing-time and
//! computation predictions, the accuracy-regime classifier, and the
//! diagnostic constants used by the underdamped analysis.
//!
//! The theorem bounds evaluate the displayed right-hand sides with their
//! printed constants. Step-size/batch preconditions are reported through a
//! flag rather than an error, so hyperparameter scans can sweep freely and
//! filter afterwards. The mixing/computation predictions drop the hidden
//! big-O constants (taken as 1) and are order-of-magnitude predictors, not
//! bounds.

use alloc::vec::Vec;

use crate::math;
use crate::samplers::Method;

/// Parameter bundle for the theorem bounds.
#[derive(Clone, Debug)]
pub struct BoundInputs {
    /// Dimension d.
    pub dim: usize,
    /// Number of data components N.
    pub data_size: usize,
    /// Strong convexity m.
    pub strong_convexity: f64,
    /// Gradient Lipschitz constant M.
    pub smoothness: f64,
    /// Hessian Lipschitz constant L (0 for quadratics); enters the
    /// overdamped bounds only.
    pub hessian_lipschitz: f64,
    /// Step size δ.
    pub step_size: f64,
    /// Iteration count T.
    pub iterations: f64,
    /// Mini-batch size n.
    pub batch_size: usize,
    /// SVRG epoch length τ.
    pub epoch_length: Option<usize>,
    /// Gradient-noise scale σ (SGLD bound only; the noise variance is
    /// σ²·d). Not derivable from the model: measure it empirically.
    pub noise_scale: Option<f64>,
    /// Initial distance W2(p⁰, p*).
    pub w2_init: f64,
}

/// A bound value together with its precondition status. `value` is always
/// the evaluated right-hand side; `preconditions_met == false` means the
/// theorem does not cover the queried configuration and the value is
/// extrapolated.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundOutcome {
    pub value: f64,
    pub preconditions_met: bool,
    /// Human-readable descriptions of the violated preconditions.
    pub violations: Vec<&'static str>,
}

impl BoundOutcome {
    fn checked(value: f64, violations: Vec<&'static str>) -> Self {
        Self {
            value,
            preconditions_met: violations.is_empty(),
            violations,
        }
    }
}

/// Structural evaluation failures (missing fields).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TheoryError {
    MissingNoiseScale,
    MissingEpochLength,
}

impl core::fmt::Display for TheoryError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let msg = match self {
            TheoryError::MissingNoiseScale => "the SGLD bound needs the gradient-noise scale σ",
            TheoryError::MissingEpochLength => "the SVRG bounds need the epoch length τ",
        };
        f.write_str(msg)
    }
}

impl core::error::Error for TheoryError {}

/// Which SVRG variant a bound refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SvrgBoundOption {
    /// Uniform-history anchor (Option I).
    I,
    /// Current-iterate anchor (Option II).
    II,
}

/// SGLD after T iterations with noise variance σ²d:
///
/// `exp(-δmT)·W2⁰ + δLd/(2m) + 11·δM^{3/2}√d/(5m) + σ√(δd)/(2√m)`.
pub fn sgld_bound(inputs: &BoundInputs) -> Result<f64, TheoryError> {
    let sigma = inputs.noise_scale.ok_or(TheoryError::MissingNoiseScale)?;
    let d = inputs.dim as f64;
    let (m, big_m, l) = (
        inputs.strong_convexity,
        inputs.smoothness,
        inputs.hessian_lipschitz,
    );
    let delta = inputs.step_size;
    let transient = math::exp(-delta * m * inputs.iterations) * inputs.w2_init;
    Ok(transient
        + delta * l * d / (2.0 * m)
        + 11.0 * delta * math::powf(big_m, 1.5) * math::sqrt(d) / (5.0 * m)
        + sigma * math::sqrt(delta * d) / (2.0 * math::sqrt(m)))
}

/// SAGA-LD (requires δ < n/(8MN) and n ≥ 9):
///
/// `5·exp(-mδT/4)·W2⁰ + 2δLd/m + 2δM^{3/2}√d/m + 24δM√(dN)/(√m·n)`.
pub fn saga_bound(inputs: &BoundInputs) -> BoundOutcome {
    let d = inputs.dim as f64;
    let big_n = inputs.data_size as f64;
    let n = inputs.batch_size as f64;
    let (m, big_m, l) = (
        inputs.strong_convexity,
        inputs.smoothness,
        inputs.hessian_lipschitz,
    );
    let delta = inputs.step_size;

    let mut violations = Vec::new();
    if !(delta < n / (8.0 * big_m * big_n)) {
        violations.push("step size must satisfy δ < n/(8MN)");
    }
    if inputs.batch_size < 9 {
        violations.push("batch size must satisfy n ≥ 9");
    }

    let value = 5.0 * math::exp(-m * delta * inputs.iterations / 4.0) * inputs.w2_init
        + 2.0 * delta * l * d / m
        + 2.0 * delta * math::powf(big_m, 1.5) * math::sqrt(d) / m
        + 24.0 * delta * big_m * math::sqrt(d * big_n) / (math::sqrt(m) * n);
    BoundOutcome::checked(value, violations)
}

/// SVRG-LD.
///
/// Option I (δ < 1/(8M), n ≥ 2, τ ≥ 8/(mδ); stated at epoch boundaries):
/// `exp(-δmT/56)·√(M/m)·W2⁰ + 2δLd/m + 2δM^{3/2}√d/m + 64M^{3/2}√(δd)/(m√n)`.
///
/// Option II (δ < √n/(4τM)):
/// `exp(-δmT/4)·W2⁰ + √2·δLd/m + 5δM^{3/2}√d/m + 9δMτ√d/√(mn)`.
pub fn svrg_bound(inputs: &BoundInputs, option: SvrgBoundOption) -> Result<BoundOutcome, TheoryError> {
    let tau = inputs.epoch_length.ok_or(TheoryError::MissingEpochLength)? as f64;
    let d = inputs.dim as f64;
    let n = inputs.batch_size as f64;
    let (m, big_m, l) = (
        inputs.strong_convexity,
        inputs.smoothness,
        inputs.hessian_lipschitz,
    );
    let delta = inputs.step_size;
    let mut violations = Vec::new();

    let value = match option {
        SvrgBoundOption::I => {
            if !(delta < 1.0 / (8.0 * big_m)) {
                violations.push("step size must satisfy δ < 1/(8M)");
            }
            if inputs.batch_size < 2 {
                violations.push("batch size must satisfy n ≥ 2");
            }
            if !(tau >= 8.0 / (m * delta)) {
                violations.push("epoch length must satisfy τ ≥ 8/(mδ)");
            }
            math::exp(-delta * m * inputs.iterations / 56.0)
                * math::sqrt(big_m / m)
                * inputs.w2_init
                + 2.0 * delta * l * d / m
                + 2.0 * delta * math::powf(big_m, 1.5) * math::sqrt(d) / m
                + 64.0 * math::powf(big_m, 1.5) * math::sqrt(delta * d) / (m * math::sqrt(n))
        }
        SvrgBoundOption::II => {
            if !(delta < math::sqrt(n) / (4.0 * tau * big_m)) {
                violations.push("step size must satisfy δ < √n/(4τM)");
            }
            math::exp(-delta * m * inputs.iterations / 4.0) * inputs.w2_init
                + core::f64::consts::SQRT_2 * delta * l * d / m
                + 5.0 * delta * math::powf(big_m, 1.5) * math::sqrt(d) / m
                + 9.0 * delta * big_m * tau * math::sqrt(d) / math::sqrt(m * n)
        }
    };
    Ok(BoundOutcome::checked(value, violations))
}

/// CV-ULD started at the Dirac mass on `(x*, 0)` (requires δ < 1/M):
///
/// `4·exp(-mδT/2)·W2⁰ + 164δM²√d/m^{3/2} + 83M√d/(m^{3/2}√n)`.
///
/// The last term does not vanish as δ → 0: it is the floor set by the
/// gradient-estimate noise at batch size n.
pub fn cvuld_bound(inputs: &BoundInputs) -> BoundOutcome {
    let d = inputs.dim as f64;
    let n = inputs.batch_size as f64;
    let (m, big_m) = (inputs.strong_convexity, inputs.smoothness);
    let delta = inputs.step_size;
    let mut violations = Vec::new();
    if !(delta < 1.0 / big_m) {
        violations.push("step size must satisfy δ < 1/M");
    }
    let m_32 = m * math::sqrt(m);
    let value = 4.0 * math::exp(-m * delta * inputs.iterations / 2.0) * inputs.w2_init
        + 164.0 * delta * big_m * big_m * math::sqrt(d) / m_32
        + 83.0 * big_m * math::sqrt(d) / (m_32 * math::sqrt(n));
    BoundOutcome::checked(value, violations)
}

/// W2 of the Dirac initialization at `(x*, 0)` to the stationary law:
/// `√(2d/m)`.
pub fn init_w2_bound(dim: usize, strong_convexity: f64) -> f64 {
    math::sqrt(2.0 * dim as f64 / strong_convexity)
}

/// Running kinetic-energy bound for the centered underdamped chain:
/// `E||v||² ≤ 26·d/m`.
pub fn kinetic_bound(dim: usize, strong_convexity: f64) -> f64 {
    26.0 * dim as f64 / strong_convexity
}

/// Running position-variance bound for the centered underdamped chain:
/// `E||x - x*||² ≤ 10·d/m`.
pub fn position_var_bound(dim: usize, strong_convexity: f64) -> f64 {
    10.0 * dim as f64 / strong_convexity
}

/// Stationary posterior variance bound: `E_{p*}||x - x*||² ≤ d/m`.
pub fn posterior_var_bound(dim: usize, strong_convexity: f64) -> f64 {
    dim as f64 / strong_convexity
}

/// Query bundle for the mixing/computation predictor.
#[derive(Clone, Debug)]
pub struct ComplexityQuery {
    pub algorithm: Method,
    pub kappa: f64,
    pub dim: usize,
    pub data_size: usize,
    pub batch_size: usize,
    pub epsilon: f64,
}

/// Predicted mixing time and total computation (gradient queries), with
/// all hidden constants taken as 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexityPrediction {
    pub mixing_time: f64,
    pub computation: f64,
}

/// Evaluates the per-method mixing-time and computation formulas.
pub fn complexity_predict(query: &ComplexityQuery) -> ComplexityPrediction {
    let k = query.kappa;
    let d = query.dim as f64;
    let big_n = query.data_size as f64;
    let n = query.batch_size as f64;
    let e = query.epsilon;
    let sqrt_d = math::sqrt(d);

    let (mixing_time, computation) = match query.algorithm {
        Method::Ld => (
            k * k * sqrt_d / (math::sqrt(big_n) * e),
            k * k * math::sqrt(d * big_n) / e,
        ),
        Method::Uld => (
            math::powf(k, 2.5) * sqrt_d / (math::sqrt(big_n) * e),
            math::powf(k, 2.5) * math::sqrt(d * big_n) / e,
        ),
        Method::Sgld | Method::Sguld => (k * k * d / (n * e * e), k * k * d / (e * e)),
        Method::SagaLd => (
            math::powf(k, 1.5) * sqrt_d / (n * e),
            big_n + math::powf(k, 1.5) * sqrt_d / e,
        ),
        Method::SvrgLdI => (
            math::powf(k, 3.0) * d / (n * e * e),
            big_n + math::powf(k, 3.0) * d / (e * e),
        ),
        Method::SvrgLdII => (
            math::powf(k, 11.0 / 6.0) * sqrt_d / (math::powf(big_n, 2.0 / 3.0) * e),
            big_n + math::powf(k, 5.0 / 3.0) * math::powf(big_n, 1.0 / 6.0) * sqrt_d / e,
        ),
        Method::CvLd => (
            math::powf(k, 3.0) * d / (big_n * e * e),
            big_n + math::powf(k, 6.0) * d * d / (big_n * big_n * math::powf(e, 4.0)),
        ),
        Method::CvUld => (
            math::powf(k, 2.5) * sqrt_d / (math::sqrt(big_n) * e),
            big_n + math::powf(k, 5.5) * math::powf(d, 1.5)
                / (math::powf(big_n, 1.5) * math::powf(e, 3.0)),
        ),
    };
    ComplexityPrediction {
        mixing_time,
        computation,
    }
}

/// Which method the target accuracy favors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// Crude accuracy, `ε ≥ √d/√N`: SGLD wins, less than one data pass.
    Sgld,
    /// `√d/N^{5/6} ≤ ε < √d/√N`: SAGA-LD and CV-LD/ULD comparable.
    Comparable,
    /// High accuracy, `ε < √d/N^{5/6}`: SAGA-LD wins.
    SagaLd,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::Sgld => "SGLD",
            Regime::Comparable => "SAGA-LD/CV-LD (comparable)",
            Regime::SagaLd => "SAGA-LD",
        }
    }
}

impl core::fmt::Display for Regime {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.label())
    }
}

/// Classifies the accuracy regime (threshold constants taken as 1).
pub fn regime_classify(dim: usize, data_size: usize, epsilon: f64) -> Regime {
    let sqrt_d = math::sqrt(dim as f64);
    let big_n = data_size as f64;
    if epsilon >= sqrt_d / math::sqrt(big_n) {
        Regime::Sgld
    } else if epsilon >= sqrt_d / math::powf(big_n, 5.0 / 6.0) {
        Regime::Comparable
    } else {
        Regime::SagaLd
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs() -> BoundInputs {
        BoundInputs {
            dim: 1,
            data_size: 100,
            strong_convexity: 1.0,
            smoothness: 1.0,
            hessian_lipschitz: 1.0,
            step_size: 1e-3,
            iterations: 1e4,
            batch_size: 10,
            epoch_length: Some(100),
            noise_scale: Some(1.0),
            w2_init: 1.0,
        }
    }

    #[test]
    fn sgld_bound_direct_evaluation() {
        // e^{-10} + 5e-4 + 2.2e-3 + √(1e-3)/2, evaluated independently.
        let expected = (-10.0f64).exp() + 5e-4 + 2.2e-3 + 0.5 * 1e-3f64.sqrt();
        let got = sgld_bound(&inputs()).unwrap();
        assert!((got - expected).abs() < 1e-15, "{got} vs {expected}");
    }

    #[test]
    fn sgld_bound_vanishing_cases() {
        let mut inputs = inputs();
        inputs.iterations = 1e9;
        let no_transient = sgld_bound(&inputs).unwrap();
        let tail = 5e-4 + 2.2e-3 + 0.5 * 1e-3f64.sqrt();
        assert!((no_transient - tail).abs() < 1e-12);

        inputs.noise_scale = Some(0.0);
        inputs.step_size = 1e-15;
        inputs.iterations = 1e30;
        let vanishing = sgld_bound(&inputs).unwrap();
        assert!(vanishing < 1e-11, "δ→0, σ=0, T=∞ should vanish: {vanishing}");
    }

    #[test]
    fn sgld_bound_requires_sigma() {
        let mut inputs = inputs();
        inputs.noise_scale = None;
        assert_eq!(sgld_bound(&inputs), Err(TheoryError::MissingNoiseScale));
    }

    #[test]
    fn saga_bound_direct_evaluation() {
        // 5e^{-2.5} + 0.002 + 0.002 + 0.024.
        let expected = 5.0 * (-2.5f64).exp() + 0.002 + 0.002 + 0.024;
        let outcome = saga_bound(&inputs());
        assert!((outcome.value - expected).abs() < 1e-12);
        // δ = 1e-3 < n/(8MN) = 10/800 and n = 10 ≥ 9.
        assert!(outcome.preconditions_met);
    }

    #[test]
    fn saga_bound_transient_vanishes() {
        let mut inputs = inputs();
        inputs.iterations = 1e9;
        let outcome = saga_bound(&inputs);
        let tail = 0.002 + 0.002 + 0.024;
        assert!((outcome.value - tail).abs() < 1e-12);
    }

    #[test]
    fn saga_bound_flags_violations() {
        let mut inputs = inputs();
        inputs.batch_size = 4;
        inputs.step_size = 1.0;
        let outcome = saga_bound(&inputs);
        assert!(!outcome.preconditions_met);
        assert_eq!(outcome.violations.len(), 2);
        assert!(outcome.value.is_finite());
    }

    #[test]
    fn svrg_bounds_evaluate_displayed_forms() {
        let inputs = inputs();
        let d = 1.0f64;
        let (m, big_m, l) = (1.0f64, 1.0f64, 1.0f64);
        let delta = 1e-3;
        let tau = 100.0;
        let t = 1e4;

        let one = svrg_bound(&inputs, SvrgBoundOption::I).unwrap();
        let expected_one = (-delta * m * t / 56.0).exp() * (big_m / m).sqrt()
            + 2.0 * delta * l * d / m
            + 2.0 * delta * big_m.powf(1.5) * d.sqrt() / m
            + 64.0 * big_m.powf(1.5) * (delta * d).sqrt() / (m * 10.0f64.sqrt());
        assert!((one.value - expected_one).abs() < 1e-12);
        // τ = 100 < 8/(mδ) = 8000: precondition violated.
        assert!(!one.preconditions_met);

        let two = svrg_bound(&inputs, SvrgBoundOption::II).unwrap();
        let expected_two = (-delta * m * t / 4.0).exp()
            + 2.0f64.sqrt() * delta * l * d / m
            + 5.0 * delta * big_m.powf(1.5) * d.sqrt() / m
            + 9.0 * delta * big_m * tau * d.sqrt() / (m * 10.0).sqrt();
        assert!((two.value - expected_two).abs() < 1e-12);
        // δ = 1e-3 < √10/400 ≈ 7.9e-3.
        assert!(two.preconditions_met);
    }

    #[test]
    fn cvuld_bound_floor_survives_small_steps() {
        let mut inputs = inputs();
        inputs.step_size = 1e-12;
        inputs.iterations = 1e18;
        let outcome = cvuld_bound(&inputs);
        let floor = 83.0 / 10.0f64.sqrt();
        assert!((outcome.value - floor).abs() < 1e-9);
        assert!(outcome.preconditions_met);
    }

    #[test]
    fn diagnostic_constants() {
        assert!((init_w2_bound(1, 1.0) - 2.0f64.sqrt()).abs() < 1e-15);
        assert_eq!(kinetic_bound(1, 1.0), 26.0);
        assert_eq!(position_var_bound(1, 1.0), 10.0);
        assert_eq!(posterior_var_bound(1, 1.0), 1.0);
        // Linear scaling in d/m.
        assert_eq!(kinetic_bound(4, 2.0), 52.0);
        assert_eq!(position_var_bound(4, 2.0), 20.0);
        assert_eq!(posterior_var_bound(4, 2.0), 2.0);
        assert!((init_w2_bound(4, 2.0) - 2.0).abs() < 1e-15);
        // m → ∞ limit.
        assert!(kinetic_bound(1, 1e18) < 1e-15);
    }

    #[test]
    fn table_predictions_spot_checks() {
        let query = |alg| ComplexityQuery {
            algorithm: alg,
            kappa: 1.0,
            dim: 1,
            data_size: 100,
            batch_size: 1,
            epsilon: 0.1,
        };
        let sgld = complexity_predict(&query(Method::Sgld));
        assert!((sgld.mixing_time - 100.0).abs() < 1e-12);
        let saga = complexity_predict(&query(Method::SagaLd));
        assert!((saga.mixing_time - 10.0).abs() < 1e-12);
        assert!((saga.computation - 110.0).abs() < 1e-12);
    }

    #[test]
    fn halving_epsilon_scales_mixing_by_the_right_exponent() {
        let mut query = ComplexityQuery {
            algorithm: Method::SagaLd,
            kappa: 2.0,
            dim: 4,
            data_size: 1000,
            batch_size: 10,
            epsilon: 0.1,
        };
        let coarse = complexity_predict(&query);
        query.epsilon = 0.05;
        let fine = complexity_predict(&query);
        assert!((fine.mixing_time / coarse.mixing_time - 2.0).abs() < 1e-12);

        query.algorithm = Method::Sgld;
        let fine_sgld = complexity_predict(&query);
        query.epsilon = 0.1;
        let coarse_sgld = complexity_predict(&query);
        assert!((fine_sgld.mixing_time / coarse_sgld.mixing_time - 4.0).abs() < 1e-12);
    }

    #[test]
    fn regime_examples() {
        assert_eq!(regime_classify(1, 10_000, 0.1), Regime::Sgld);
        assert_eq!(regime_classify(1, 10_000, 1e-3), Regime::Comparable);
        assert_eq!(regime_classify(1, 10_000, 1e-5), Regime::SagaLd);
    }

    #[test]
    fn regime_thresholds_are_ordered() {
        for &n in &[2usize, 10, 1_000, 1_000_000] {
            let big_n = n as f64;
            let low = 1.0 / big_n;
            let mid = 1.0 / big_n.powf(5.0 / 6.0);
            let high = 1.0 / big_n.sqrt();
            assert!(low < mid && mid < high, "ordering fails at N = {n}");
        }
    }
}
