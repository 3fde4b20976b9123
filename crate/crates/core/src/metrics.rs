//! Convergence metrics: Wasserstein-2 distances (Gaussian closed form and
//! exact 1-D empirical), mean squared error of the posterior mean, and
//! held-out predictive log probability for logistic models.
//!
//! The Gaussian W2 needs symmetric matrix square roots; a small cyclic
//! Jacobi eigensolver lives here so the crate stays free of linear-algebra
//! dependencies (dimensions up to 64 are supported, far above the desk
//! scale this crate targets).

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::potentials::{LogisticRegressionModel, sigmoid};
use crate::samplers::SampleMatrix;

/// Metric evaluation failures.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MetricError {
    DimensionMismatch,
    /// Gaussian W2 supports d ≤ 64.
    DimensionTooLarge,
    LengthMismatch,
    EmptyInput,
    /// A covariance eigenvalue fell below the PSD tolerance.
    IndefiniteCovariance,
    /// The Jacobi sweep limit was hit (ill-formed input).
    EigenDidNotConverge,
}

impl core::fmt::Display for MetricError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let msg = match self {
            MetricError::DimensionMismatch => "dimension mismatch",
            MetricError::DimensionTooLarge => "dimension exceeds the supported 64",
            MetricError::LengthMismatch => "sample lists differ in length",
            MetricError::EmptyInput => "empty input",
            MetricError::IndefiniteCovariance => "covariance is indefinite beyond tolerance",
            MetricError::EigenDidNotConverge => "eigendecomposition did not converge",
        };
        f.write_str(msg)
    }
}

impl core::error::Error for MetricError {}

/// First two moments of a distribution, exact or sampled.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianSummary {
    mean: Vec<f64>,
    /// Row-major d×d covariance, symmetrized on construction.
    cov: Vec<f64>,
    dim: usize,
}

impl GaussianSummary {
    pub fn new(mean: Vec<f64>, cov: Vec<f64>) -> Self {
        let dim = mean.len();
        assert_eq!(cov.len(), dim * dim, "covariance must be d×d");
        let mut sym = cov;
        for i in 0..dim {
            for j in (i + 1)..dim {
                let avg = 0.5 * (sym[i * dim + j] + sym[j * dim + i]);
                sym[i * dim + j] = avg;
                sym[j * dim + i] = avg;
            }
        }
        Self {
            mean,
            cov: sym,
            dim,
        }
    }

    /// Isotropic summary `N(mean, variance·I)`.
    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Self {
        let dim = mean.len();
        let mut cov = vec![0.0; dim * dim];
        for i in 0..dim {
            cov[i * dim + i] = variance;
        }
        Self::new(mean, cov)
    }

    /// Sample mean and covariance (denominator `rows - 1`).
    pub fn from_samples(samples: &SampleMatrix) -> Result<Self, MetricError> {
        let rows = samples.rows();
        let d = samples.cols();
        if rows == 0 {
            return Err(MetricError::EmptyInput);
        }
        let mean = samples.mean();
        let mut cov = vec![0.0; d * d];
        if rows > 1 {
            for r in 0..rows {
                let row = samples.row(r);
                for i in 0..d {
                    let di = row[i] - mean[i];
                    for j in i..d {
                        cov[i * d + j] += di * (row[j] - mean[j]);
                    }
                }
            }
            let denom = (rows - 1) as f64;
            for i in 0..d {
                for j in i..d {
                    cov[i * d + j] /= denom;
                    cov[j * d + i] = cov[i * d + j];
                }
            }
        }
        Ok(Self::new(mean, cov))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &[f64] {
        &self.cov
    }
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition (cyclic Jacobi)
// ---------------------------------------------------------------------------

const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
/// Eigenvectors are accumulated only when a reconstruction is needed.
fn jacobi_eigen(matrix: &[f64], d: usize) -> Result<(Vec<f64>, Vec<f64>), MetricError> {
    let mut a = matrix.to_vec();
    let mut vectors = vec![0.0; d * d];
    for i in 0..d {
        vectors[i * d + i] = 1.0;
    }
    let scale: f64 = a
        .iter()
        .map(|&x| x * x)
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..d)
            .flat_map(|i| ((i + 1)..d).map(move |j| (i, j)))
            .map(|(i, j)| a[i * d + j] * a[i * d + j])
            .sum();
        if off <= JACOBI_TOL * JACOBI_TOL * scale {
            let eigenvalues = (0..d).map(|i| a[i * d + i]).collect();
            return Ok((eigenvalues, vectors));
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = (aqq - app) / (2.0 * apq);
                // Stable tangent of the rotation angle.
                let t = theta.signum() / (theta.abs() + math::sqrt(theta * theta + 1.0));
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let s = t * c;

                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = vectors[k * d + p];
                    let vkq = vectors[k * d + q];
                    vectors[k * d + p] = c * vkp - s * vkq;
                    vectors[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(MetricError::EigenDidNotConverge)
}

/// Symmetric PSD square root via eigendecomposition. Eigenvalues below
/// `-1e-10·scale` are rejected as indefinite; small negatives inside the
/// tolerance are clamped to zero.
fn psd_sqrt(matrix: &[f64], d: usize) -> Result<Vec<f64>, MetricError> {
    let (eigenvalues, vectors) = jacobi_eigen(matrix, d)?;
    let scale = eigenvalues.iter().fold(1.0f64, |m, &l| m.max(l.abs()));
    let mut roots = vec![0.0; d];
    for (r, &l) in roots.iter_mut().zip(&eigenvalues) {
        if l < -1e-10 * scale {
            return Err(MetricError::IndefiniteCovariance);
        }
        *r = math::sqrt(l.max(0.0));
    }
    // V · diag(√λ) · Vᵀ
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in i..d {
            let mut s = 0.0;
            for (k, &r) in roots.iter().enumerate() {
                s += vectors[i * d + k] * r * vectors[j * d + k];
            }
            out[i * d + j] = s;
            out[j * d + i] = s;
        }
    }
    Ok(out)
}

fn mat_mul(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..d {
                out[i * d + j] += aik * b[k * d + j];
            }
        }
    }
    out
}

/// Closed-form W2 between Gaussians:
/// `√(||μa - μb||² + tr(Σa + Σb - 2(Σb^{1/2} Σa Σb^{1/2})^{1/2}))`.
///
/// Symmetric in its arguments up to roundoff (~1e-9 relative).
pub fn w2_gaussian(a: &GaussianSummary, b: &GaussianSummary) -> Result<f64, MetricError> {
    let d = a.dim();
    if d != b.dim() {
        return Err(MetricError::DimensionMismatch);
    }
    if d > 64 {
        return Err(MetricError::DimensionTooLarge);
    }
    let mean_sq: f64 = a
        .mean()
        .iter()
        .zip(b.mean())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum();

    let sqrt_b = psd_sqrt(b.cov(), d)?;
    let inner = mat_mul(&mat_mul(&sqrt_b, a.cov(), d), &sqrt_b, d);
    // Symmetrize against roundoff before the second root.
    let mut inner_sym = inner;
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (inner_sym[i * d + j] + inner_sym[j * d + i]);
            inner_sym[i * d + j] = avg;
            inner_sym[j * d + i] = avg;
        }
    }
    let cross = psd_sqrt(&inner_sym, d)?;

    let mut trace_term = 0.0;
    let mut trace_scale = 0.0;
    for i in 0..d {
        trace_term += a.cov()[i * d + i] + b.cov()[i * d + i] - 2.0 * cross[i * d + i];
        trace_scale += a.cov()[i * d + i] + b.cov()[i * d + i];
    }
    // The squared distance carries ~1e-13·scale of accumulated rotation
    // roundoff; anything below that resolution is numerically zero (and
    // identical arguments land there).
    let w2_sq = mean_sq + trace_term;
    let resolution = 4e-13 * (trace_scale + mean_sq);
    if w2_sq <= resolution {
        return Ok(0.0);
    }
    Ok(math::sqrt(w2_sq))
}

/// Exact W2 between two equal-size empirical distributions on the line:
/// sort both samples and take the RMS of the paired differences.
pub fn w2_empirical_1d(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch);
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_unstable_by(f64::total_cmp);
    sb.sort_unstable_by(f64::total_cmp);
    let sum_sq: f64 = sa
        .iter()
        .zip(&sb)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum();
    Ok(math::sqrt(sum_sq / a.len() as f64))
}

/// Squared distance between the sample mean and a reference point:
/// `||mean(samples) - reference||²`.
pub fn mse(samples: &SampleMatrix, reference: &[f64]) -> Result<f64, MetricError> {
    if samples.rows() == 0 {
        return Err(MetricError::EmptyInput);
    }
    if samples.cols() != reference.len() {
        return Err(MetricError::DimensionMismatch);
    }
    let mean = samples.mean();
    Ok(mean
        .iter()
        .zip(reference)
        .map(|(&m, &r)| (m - r) * (m - r))
        .sum())
}

/// Log predictive probability of one labeled row under one parameter draw.
#[inline]
fn log_predictive(beta: &[f64], row: &[f64], label: u8) -> f64 {
    let z = math::dot(beta, row);
    let signed = if label == 1 { z } else { -z };
    // log σ(signed), stably.
    if signed > 0.0 {
        -math::ln_1p(math::exp(-signed))
    } else {
        signed - math::ln_1p(math::exp(signed))
    }
}

/// Posterior-averaged held-out log probability:
/// `Σ_j log( (1/S) Σ_s P(y_j | β_s, X_j) )`, always ≤ 0.
///
/// The inner average runs through log-sum-exp, so extreme draws cannot
/// underflow the whole row.
pub fn heldout_log_prob(
    test_model: &LogisticRegressionModel,
    samples: &SampleMatrix,
) -> Result<f64, MetricError> {
    use crate::potentials::SumPotential;
    let rows = test_model.num_components();
    if rows == 0 || samples.rows() == 0 {
        return Err(MetricError::EmptyInput);
    }
    if samples.cols() != test_model.dim() {
        return Err(MetricError::DimensionMismatch);
    }
    let s = samples.rows();
    let log_s = math::ln(s as f64);
    let mut total = 0.0;
    let mut log_probs = vec![0.0; s];
    for j in 0..rows {
        let row = test_model.row(j);
        let label = test_model.label(j);
        let mut max_lp = f64::NEG_INFINITY;
        for (k, lp) in log_probs.iter_mut().enumerate() {
            *lp = log_predictive(samples.row(k), row, label);
            max_lp = f64::max(max_lp, *lp);
        }
        let sum_exp: f64 = log_probs.iter().map(|&lp| math::exp(lp - max_lp)).sum();
        total += max_lp + math::ln(sum_exp) - log_s;
    }
    Ok(total)
}

/// Plug-in variant: held-out log probability at a single parameter point
/// (e.g. the posterior mean).
pub fn heldout_log_prob_plugin(
    test_model: &LogisticRegressionModel,
    beta: &[f64],
) -> Result<f64, MetricError> {
    use crate::potentials::SumPotential;
    let rows = test_model.num_components();
    if rows == 0 {
        return Err(MetricError::EmptyInput);
    }
    if beta.len() != test_model.dim() {
        return Err(MetricError::DimensionMismatch);
    }
    Ok((0..rows)
        .map(|j| log_predictive(beta, test_model.row(j), test_model.label(j)))
        .sum())
}

/// Predictive probability of one row, for incremental tracking by harnesses.
pub fn predictive_prob(beta: &[f64], row: &[f64], label: u8) -> f64 {
    let z = math::dot(beta, row);
    if label == 1 { sigmoid(z) } else { sigmoid(-z) }
}
