//! Sum-decomposable potentials (negative log posteriors) and their gradients.
//!
//! Every sampler in this crate targets `p*(x) ∝ exp(-f(x))` for a potential
//! of the form `f = f_0 + Σ_{i=0..N-1} f_i`: one term per datum plus an
//! optional prior term `f_0`. Mini-batch estimators subsample the data
//! terms only; the prior gradient is always computed exactly and added to
//! every estimate, which keeps all estimators unbiased without
//! special-casing a prior index.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::rng::{StreamRng, StreamRole};

/// Smoothness and convexity constants of a potential.
///
/// `smoothness` is the gradient-Lipschitz constant of the full `f`
/// (conventionally `M`), `component_smoothness` a uniform per-component
/// constant (`M̃`, with `M ≤ N·M̃`), `strong_convexity` the strong-convexity
/// modulus (`m`), and `hessian_lipschitz` the Lipschitz constant of the
/// Hessian (`L`) when one is known.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothnessConstants {
    pub strong_convexity: f64,
    pub smoothness: f64,
    pub component_smoothness: f64,
    pub hessian_lipschitz: Option<f64>,
}

impl SmoothnessConstants {
    /// Condition number `κ = M/m`.
    pub fn kappa(&self) -> f64 {
        self.smoothness / self.strong_convexity
    }
}

/// Raised by [`SumPotential::constants`] for models outside the smooth,
/// strongly convex class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstantsUnavailable {
    pub model: &'static str,
    pub reason: &'static str,
}

impl core::fmt::Display for ConstantsUnavailable {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "smoothness constants unavailable for {}: {}",
            self.model, self.reason
        )
    }
}

impl core::error::Error for ConstantsUnavailable {}

/// A potential `f = f_0 + Σ f_i` with per-component value/gradient oracles.
///
/// Implementations are immutable after construction and safe to share
/// across concurrently running chains; all methods are pure.
///
/// Component indices run over `0..num_components()`. Methods panic on an
/// out-of-range index or a state vector whose length differs from `dim()`.
pub trait SumPotential {
    /// Number of data components `N`.
    fn num_components(&self) -> usize;

    /// Parameter dimension `d`.
    fn dim(&self) -> usize;

    /// Whether a non-trivial prior term `f_0` is present.
    fn has_prior(&self) -> bool {
        false
    }

    /// Value of the data term `f_i(x)`.
    fn component_value(&self, i: usize, x: &[f64]) -> f64;

    /// Gradient of the data term: `out = ∇f_i(x)`.
    fn component_grad_into(&self, i: usize, x: &[f64], out: &mut [f64]);

    /// Value of the prior term `f_0(x)`; zero by default.
    fn prior_value(&self, _x: &[f64]) -> f64 {
        0.0
    }

    /// Gradient of the prior term; zero by default.
    fn prior_grad_into(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    /// Smoothness/convexity constants, when the model satisfies the
    /// smooth strongly-convex assumptions.
    fn constants(&self) -> Result<SmoothnessConstants, ConstantsUnavailable>;

    /// Full potential value `f(x) = f_0(x) + Σ_i f_i(x)`.
    fn value(&self, x: &[f64]) -> f64 {
        let mut total = self.prior_value(x);
        for i in 0..self.num_components() {
            total += self.component_value(i, x);
        }
        total
    }

    /// Full gradient `out = ∇f_0(x) + Σ_i ∇f_i(x)`.
    fn grad_full_into(&self, x: &[f64], out: &mut [f64]) {
        self.prior_grad_into(x, out);
        let mut tmp = vec![0.0; self.dim()];
        for i in 0..self.num_components() {
            self.component_grad_into(i, x, &mut tmp);
            for (o, &t) in out.iter_mut().zip(&tmp) {
                *o += t;
            }
        }
    }

    /// Convenience allocating wrapper around [`grad_full_into`].
    ///
    /// [`grad_full_into`]: SumPotential::grad_full_into
    fn grad_full(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.grad_full_into(x, &mut out);
        out
    }

    /// Convenience allocating wrapper around [`component_grad_into`].
    ///
    /// [`component_grad_into`]: SumPotential::component_grad_into
    fn grad_component(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.component_grad_into(i, x, &mut out);
        out
    }
}

/// Wraps a potential and counts component-gradient oracle queries.
///
/// Everything the samplers report as "gradient queries" or "passes through
/// data" flows through this counter: one unit per `∇f_i` evaluation, prior
/// gradients free. Full-gradient evaluations therefore cost `N`.
pub struct GradOracle<'a, P: SumPotential + ?Sized> {
    potential: &'a P,
    component_queries: u64,
}

impl<'a, P: SumPotential + ?Sized> GradOracle<'a, P> {
    pub fn new(potential: &'a P) -> Self {
        Self {
            potential,
            component_queries: 0,
        }
    }

    pub fn potential(&self) -> &'a P {
        self.potential
    }

    pub fn component_queries(&self) -> u64 {
        self.component_queries
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    pub fn num_components(&self) -> usize {
        self.potential.num_components()
    }

    #[inline]
    pub fn component_grad_into(&mut self, i: usize, x: &[f64], out: &mut [f64]) {
        self.component_queries += 1;
        self.potential.component_grad_into(i, x, out);
    }

    #[inline]
    pub fn prior_grad_into(&mut self, x: &[f64], out: &mut [f64]) {
        self.potential.prior_grad_into(x, out);
    }

    pub fn grad_full_into(&mut self, x: &[f64], out: &mut [f64]) {
        self.component_queries += self.potential.num_components() as u64;
        self.potential.grad_full_into(x, out);
    }
}

fn check_dim(expected: usize, x: &[f64]) {
    assert!(
        x.len() == expected,
        "state dimension mismatch: expected {expected}, got {}",
        x.len()
    );
}

fn check_index(n: usize, i: usize) {
    assert!(i < n, "component index {i} out of range (N = {n})");
}

// ---------------------------------------------------------------------------
// Gaussian location target (exactly solvable)
// ---------------------------------------------------------------------------

/// Isotropic Gaussian location model: `f_i(x) = ||x - z_i||² / (2σ0²)`,
/// no prior. The posterior is exactly `N(z̄, (σ0²/N)·I)`, which makes this
/// the reference target for closed-form accuracy checks.
#[derive(Clone, Debug)]
pub struct GaussianTarget {
    /// Row-major `N × d` data.
    data: Vec<f64>,
    n: usize,
    dim: usize,
    noise_scale: f64,
}

impl GaussianTarget {
    pub fn new(data: Vec<f64>, dim: usize, noise_scale: f64) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        assert!(noise_scale > 0.0, "noise scale must be positive");
        assert!(
            !data.is_empty() && data.len() % dim == 0,
            "data length {} is not a positive multiple of dim {dim}",
            data.len()
        );
        Self {
            n: data.len() / dim,
            data,
            dim,
            noise_scale,
        }
    }

    /// Draws `n` data points `z_i ~ N(data_mean, data_std²·I)`.
    pub fn synthesize(
        n: usize,
        dim: usize,
        data_mean: f64,
        data_std: f64,
        noise_scale: f64,
        seed: u64,
    ) -> Self {
        assert!(n >= 1 && dim >= 1);
        let mut rng = StreamRng::derive(seed, 0, StreamRole::Datagen);
        let mut data = vec![0.0; n * dim];
        for v in data.iter_mut() {
            *v = data_mean + data_std * rng.standard_normal();
        }
        Self::new(data, dim, noise_scale)
    }

    pub fn data_row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }

    /// Posterior mean, the data average `z̄`.
    pub fn posterior_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for i in 0..self.n {
            for (m, &z) in mean.iter_mut().zip(self.data_row(i)) {
                *m += z;
            }
        }
        for m in mean.iter_mut() {
            *m /= self.n as f64;
        }
        mean
    }

    /// Per-coordinate posterior variance `σ0²/N`.
    pub fn posterior_variance(&self) -> f64 {
        self.noise_scale * self.noise_scale / self.n as f64
    }

    /// Exact posterior draw, for oracle tests and baselines.
    pub fn sample_posterior_into(&self, rng: &mut StreamRng, out: &mut [f64]) {
        check_dim(self.dim, out);
        let mean = self.posterior_mean();
        let sd = math::sqrt(self.posterior_variance());
        for (o, m) in out.iter_mut().zip(mean) {
            *o = m + sd * rng.standard_normal();
        }
    }
}

impl SumPotential for GaussianTarget {
    fn num_components(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        check_index(self.n, i);
        check_dim(self.dim, x);
        let inv = 1.0 / (self.noise_scale * self.noise_scale);
        let row = self.data_row(i);
        0.5 * inv
            * x.iter()
                .zip(row)
                .map(|(&xi, &zi)| (xi - zi) * (xi - zi))
                .sum::<f64>()
    }

    fn component_grad_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        check_index(self.n, i);
        check_dim(self.dim, x);
        check_dim(self.dim, out);
        let inv = 1.0 / (self.noise_scale * self.noise_scale);
        let row = self.data_row(i);
        for ((o, &xi), &zi) in out.iter_mut().zip(x).zip(row) {
            *o = (xi - zi) * inv;
        }
    }

    fn constants(&self) -> Result<SmoothnessConstants, ConstantsUnavailable> {
        let inv = 1.0 / (self.noise_scale * self.noise_scale);
        Ok(SmoothnessConstants {
            strong_convexity: self.n as f64 * inv,
            smoothness: self.n as f64 * inv,
            component_smoothness: inv,
            hessian_lipschitz: Some(0.0),
        })
    }
}

// ---------------------------------------------------------------------------
// Bayesian logistic regression
// ---------------------------------------------------------------------------

/// Numerically stable `log(1 + e^z)`.
#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + math::ln_1p(math::exp(-z))
    } else {
        math::ln_1p(math::exp(z))
    }
}

/// Logistic link `1 / (1 + e^{-z})`.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + math::exp(-z))
    } else {
        let e = math::exp(z);
        e / (1.0 + e)
    }
}

/// Bayesian logistic regression with a Gaussian prior `β ~ N(0, α·I)`:
/// `f_i(β) = log(1 + exp(β·X_i)) - y_i·(β·X_i)`, `f_0(β) = ||β||²/(2α)`.
#[derive(Clone, Debug)]
pub struct LogisticRegressionModel {
    /// Row-major `N × d` design matrix.
    design: Vec<f64>,
    labels: Vec<u8>,
    n: usize,
    dim: usize,
    prior_variance: f64,
}

impl LogisticRegressionModel {
    pub fn new(design: Vec<f64>, labels: Vec<u8>, dim: usize, prior_variance: f64) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        assert!(prior_variance > 0.0, "prior variance must be positive");
        assert!(
            !labels.is_empty() && design.len() == labels.len() * dim,
            "design length {} does not match {} labels of dim {dim}",
            design.len(),
            labels.len()
        );
        assert!(
            labels.iter().all(|&y| y <= 1),
            "labels must lie in {{0, 1}}"
        );
        Self {
            n: labels.len(),
            design,
            labels,
            dim,
            prior_variance,
        }
    }

    /// Draws `X_i ~ N(0, I)`, a ground-truth `β* ~ N(0, beta_scale²·I)`,
    /// and labels from the model.
    pub fn synthesize(n: usize, dim: usize, prior_variance: f64, beta_scale: f64, seed: u64) -> Self {
        assert!(n >= 1 && dim >= 1);
        let mut rng = StreamRng::derive(seed, 0, StreamRole::Datagen);
        let mut truth = vec![0.0; dim];
        for t in truth.iter_mut() {
            *t = beta_scale * rng.standard_normal();
        }
        let mut design = vec![0.0; n * dim];
        for v in design.iter_mut() {
            *v = rng.standard_normal();
        }
        let mut labels = vec![0u8; n];
        for (i, label) in labels.iter_mut().enumerate() {
            let z = math::dot(&design[i * dim..(i + 1) * dim], &truth);
            *label = u8::from(rng.uniform() < sigmoid(z));
        }
        Self::new(design, labels, dim, prior_variance)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.design[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn prior_variance(&self) -> f64 {
        self.prior_variance
    }

    /// Builds a model over the rows named by `indices` (used for
    /// train/test splitting).
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut design = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            design.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self::new(design, labels, self.dim, self.prior_variance)
    }
}

impl SumPotential for LogisticRegressionModel {
    fn num_components(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn has_prior(&self) -> bool {
        true
    }

    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        check_index(self.n, i);
        check_dim(self.dim, x);
        let z = math::dot(x, self.row(i));
        softplus(z) - f64::from(self.labels[i]) * z
    }

    fn component_grad_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        check_index(self.n, i);
        check_dim(self.dim, x);
        check_dim(self.dim, out);
        let row = self.row(i);
        let factor = sigmoid(math::dot(x, row)) - f64::from(self.labels[i]);
        for (o, &r) in out.iter_mut().zip(row) {
            *o = factor * r;
        }
    }

    fn prior_value(&self, x: &[f64]) -> f64 {
        check_dim(self.dim, x);
        0.5 * math::hypot_sq(x) / self.prior_variance
    }

    fn prior_grad_into(&self, x: &[f64], out: &mut [f64]) {
        check_dim(self.dim, x);
        check_dim(self.dim, out);
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = xi / self.prior_variance;
        }
    }

    fn constants(&self) -> Result<SmoothnessConstants, ConstantsUnavailable> {
        // The logistic Hessian per component is s'(z)·X_i X_iᵀ with
        // s' ≤ 1/4, and |s''| ≤ 1/(6√3) bounds the Hessian Lipschitz term.
        let mut sum_sq = 0.0;
        let mut max_sq = 0.0;
        let mut sum_cubed = 0.0;
        for i in 0..self.n {
            let norm_sq = math::hypot_sq(self.row(i));
            sum_sq += norm_sq;
            max_sq = f64::max(max_sq, norm_sq);
            sum_cubed += norm_sq * math::sqrt(norm_sq);
        }
        Ok(SmoothnessConstants {
            strong_convexity: 1.0 / self.prior_variance,
            smoothness: 0.25 * sum_sq + 1.0 / self.prior_variance,
            component_smoothness: 0.25 * max_sq,
            hessian_lipschitz: Some(sum_cubed / (6.0 * math::sqrt(3.0))),
        })
    }
}

// ---------------------------------------------------------------------------
// Log-normal location/scale model
// ---------------------------------------------------------------------------

/// Log-normal likelihood over strictly positive data, parameterized by
/// `θ = (μ, s)` with `σ = e^s` so the state space is unconstrained:
///
/// `f_i(μ, s) = ln x_i + s + ln(2π)/2 + (ln x_i - μ)²·e^{-2s}/2`
///
/// with a flat prior. The target is neither smooth nor strongly convex
/// globally, so [`SumPotential::constants`] reports unavailability; the
/// underdamped samplers refuse it while the overdamped ones run.
#[derive(Clone, Debug)]
pub struct LogNormalModel {
    data: Vec<f64>,
    /// Cached `ln x_i`.
    log_data: Vec<f64>,
}

impl LogNormalModel {
    pub fn new(data: Vec<f64>) -> Result<Self, String> {
        if data.is_empty() {
            return Err(String::from("log-normal data must be nonempty"));
        }
        for (i, &x) in data.iter().enumerate() {
            if !(x > 0.0) {
                return Err(format!(
                    "log-normal data must be strictly positive; row {i} is {x}"
                ));
            }
        }
        let log_data = data.iter().map(|&x| math::ln(x)).collect();
        Ok(Self { data, log_data })
    }

    /// Draws `n` values from LogNormal(μ*, σ*²).
    pub fn synthesize(n: usize, location: f64, log_scale: f64, seed: u64) -> Self {
        assert!(n >= 1);
        assert!(log_scale > 0.0);
        let mut rng = StreamRng::derive(seed, 0, StreamRole::Datagen);
        let data = (0..n)
            .map(|_| math::exp(location + log_scale * rng.standard_normal()))
            .collect();
        Self::new(data).expect("synthesized log-normal data is positive")
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

impl SumPotential for LogNormalModel {
    fn num_components(&self) -> usize {
        self.data.len()
    }

    fn dim(&self) -> usize {
        2
    }

    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        check_index(self.data.len(), i);
        check_dim(2, x);
        let (mu, s) = (x[0], x[1]);
        let r = self.log_data[i] - mu;
        const HALF_LN_2PI: f64 = 0.918_938_533_204_672_78;
        self.log_data[i] + s + HALF_LN_2PI + 0.5 * r * r * math::exp(-2.0 * s)
    }

    fn component_grad_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        check_index(self.data.len(), i);
        check_dim(2, x);
        check_dim(2, out);
        let (mu, s) = (x[0], x[1]);
        let r = self.log_data[i] - mu;
        let w = math::exp(-2.0 * s);
        out[0] = -r * w;
        out[1] = 1.0 - r * r * w;
    }

    fn constants(&self) -> Result<SmoothnessConstants, ConstantsUnavailable> {
        Err(ConstantsUnavailable {
            model: "log-normal",
            reason: "the potential is neither gradient-Lipschitz nor strongly convex",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_two_point() -> GaussianTarget {
        GaussianTarget::new(vec![1.0, 3.0], 1, 1.0)
    }

    #[test]
    fn logistic_component_grad_at_zero() {
        let model = LogisticRegressionModel::new(vec![1.0, 2.0], vec![1], 2, 1.0);
        let g = model.grad_component(0, &[0.0, 0.0]);
        assert_eq!(g, vec![-0.5, -1.0]);
    }

    #[test]
    fn gaussian_component_grad_vanishes_at_datum() {
        let model = GaussianTarget::new(vec![3.0], 1, 1.0);
        assert_eq!(model.grad_component(0, &[3.0]), vec![0.0]);
    }

    #[test]
    fn lognormal_grad_matches_finite_differences() {
        let model = LogNormalModel::new(vec![core::f64::consts::E]).unwrap();
        let theta = [0.0, 0.0];
        let g = model.grad_component(0, &theta);
        // Central finite differences with h = 1e-6.
        let h = 1e-6;
        for j in 0..2 {
            let mut hi = theta;
            let mut lo = theta;
            hi[j] += h;
            lo[j] -= h;
            let fd = (model.component_value(0, &hi) - model.component_value(0, &lo)) / (2.0 * h);
            assert!(
                (g[j] - fd).abs() < 1e-6,
                "coordinate {j}: analytic {} vs fd {fd}",
                g[j]
            );
        }
        assert!((g[0] + 1.0).abs() < 1e-12);
        assert!(g[1].abs() < 1e-12);
    }

    #[test]
    fn gaussian_full_gradient_at_mode_and_elsewhere() {
        let model = gaussian_two_point();
        assert_eq!(model.grad_full(&[2.0]), vec![0.0]);
        assert_eq!(model.grad_full(&[0.0]), vec![-4.0]);
    }

    #[test]
    fn logistic_full_gradient_at_origin_has_no_prior_term() {
        let model = LogisticRegressionModel::synthesize(20, 3, 1.0, 1.0, 4);
        let g = model.grad_full(&vec![0.0; 3]);
        let mut expected = vec![0.0; 3];
        for i in 0..20 {
            let w = 0.5 - f64::from(model.label(i));
            for (e, &r) in expected.iter_mut().zip(model.row(i)) {
                *e += w * r;
            }
        }
        for (a, b) in g.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_constants_are_exact() {
        let model = GaussianTarget::synthesize(10, 3, 0.0, 1.0, 1.0, 1);
        let c = model.constants().unwrap();
        assert_eq!(c.smoothness, 10.0);
        assert_eq!(c.strong_convexity, 10.0);
        assert_eq!(c.kappa(), 1.0);
        assert_eq!(c.hessian_lipschitz, Some(0.0));
    }

    #[test]
    fn logistic_constants_single_row() {
        let model = LogisticRegressionModel::new(vec![2.0, 0.0], vec![1], 2, 1.0);
        let c = model.constants().unwrap();
        assert_eq!(c.smoothness, 2.0);
        assert_eq!(c.strong_convexity, 1.0);
        assert_eq!(c.component_smoothness, 1.0);
    }

    #[test]
    fn lognormal_constants_unavailable() {
        let model = LogNormalModel::synthesize(4, 0.0, 1.0, 7);
        assert!(model.constants().is_err());
    }

    #[test]
    fn lognormal_synthesis_is_deterministic_and_positive() {
        let a = LogNormalModel::synthesize(4, 0.0, 1.0, 7);
        let b = LogNormalModel::synthesize(4, 0.0, 1.0, 7);
        assert_eq!(a.data(), b.data());
        assert!(a.data().iter().all(|&x| x > 0.0));
    }

    #[test]
    fn logistic_synthesis_labels_nondegenerate() {
        let model = LogisticRegressionModel::synthesize(100, 2, 1.0, 1.0, 1);
        let ones: usize = (0..100).map(|i| usize::from(model.label(i))).sum();
        assert!(ones > 0 && ones < 100, "labels collapsed: {ones}/100");
    }

    #[test]
    fn gaussian_injected_data_posterior_moments() {
        let model = gaussian_two_point();
        assert_eq!(model.posterior_mean(), vec![2.0]);
        assert_eq!(model.posterior_variance(), 0.5);
    }

    #[test]
    fn oracle_counts_component_queries_only() {
        let model = gaussian_two_point();
        let mut oracle = GradOracle::new(&model);
        let mut buf = [0.0];
        oracle.component_grad_into(0, &[0.5], &mut buf);
        oracle.prior_grad_into(&[0.5], &mut buf);
        oracle.grad_full_into(&[0.5], &mut buf);
        assert_eq!(oracle.component_queries(), 3);
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn component_index_out_of_range_panics() {
        let model = gaussian_two_point();
        let _ = model.grad_component(2, &[0.0]);
    }

    #[test]
    #[should_panic(expected = "dimension mismatch")]
    fn dimension_mismatch_panics() {
        let model = gaussian_two_point();
        let _ = model.grad_full(&[0.0, 1.0]);
    }
}
