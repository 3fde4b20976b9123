//! Grid-search experiment runner: replicated chains over hyperparameter
//! grids, convergence metrics, passes-through-data accounting, and
//! deterministic results emission.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use vrlmc_core::metrics::{self, GaussianSummary};
use vrlmc_core::optimizer::{ModeOptions, ModeResult, saga_sgd_minimize};
use vrlmc_core::potentials::{
    GaussianTarget, LogNormalModel, LogisticRegressionModel, SumPotential,
};
use vrlmc_core::rng::{StreamRng, StreamRole};
use vrlmc_core::samplers::{
    ChainConfig, ChainOutput, Method, queries_after, run_chain,
};

use crate::CliError;
use crate::config::ConfigMap;
use crate::dataio::{ModelKind, RawDataset, load_dataset};

/// Replica id reserved for harness-internal baseline chains, far outside
/// the experiment replica range.
pub const REFERENCE_REPLICA: u64 = u64::MAX - 1;

/// Target metric of an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricKind {
    /// Held-out predictive log probability (higher is better).
    Heldout,
    /// Squared error of the posterior mean against a reference
    /// (lower is better).
    Mse,
    /// Gaussian-moment W2 against the exact posterior (lower is better).
    W2,
}

impl MetricKind {
    pub fn parse(name: &str) -> Result<Self, CliError> {
        match name.trim().to_ascii_lowercase().as_str() {
            "heldout" => Ok(MetricKind::Heldout),
            "mse" => Ok(MetricKind::Mse),
            "w2" => Ok(MetricKind::W2),
            other => Err(CliError::config(format!(
                "unknown metric `{other}` (expected heldout, mse, or w2)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Heldout => "heldout",
            MetricKind::Mse => "mse",
            MetricKind::W2 => "w2",
        }
    }

    /// True when `value` is at least as good as `target`.
    fn reaches(&self, value: f64, target: f64) -> bool {
        match self {
            MetricKind::Heldout => value >= target,
            MetricKind::Mse | MetricKind::W2 => value <= target,
        }
    }

    /// True when `a` is strictly better than `b`.
    fn better(&self, a: f64, b: f64) -> bool {
        match self {
            MetricKind::Heldout => a > b,
            MetricKind::Mse | MetricKind::W2 => a < b,
        }
    }
}

/// One hyperparameter combination.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub delta: f64,
    pub batch: usize,
    pub tau: Option<usize>,
}

impl GridPoint {
    fn sort_key(&self) -> (f64, usize, usize) {
        (self.delta, self.batch, self.tau.unwrap_or(0))
    }
}

/// A model bound to its hyperparameters, ready to sample.
pub enum BuiltModel {
    Gaussian(GaussianTarget),
    Logistic(LogisticRegressionModel),
    LogNormal(LogNormalModel),
}

impl BuiltModel {
    pub fn potential(&self) -> &dyn SumPotential {
        match self {
            BuiltModel::Gaussian(m) => m,
            BuiltModel::Logistic(m) => m,
            BuiltModel::LogNormal(m) => m,
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            BuiltModel::Gaussian(_) => ModelKind::Gaussian,
            BuiltModel::Logistic(_) => ModelKind::Logistic,
            BuiltModel::LogNormal(_) => ModelKind::LogNormal,
        }
    }
}

/// Builds the dataset named by the configuration: either loaded from
/// `data` or synthesized from `synth-n`/`synth-d` and the per-kind
/// parameters, seeded by the master seed.
pub fn build_dataset(map: &ConfigMap, kind: ModelKind, seed: u64) -> Result<RawDataset, CliError> {
    if let Some(path) = map.get("data") {
        return load_dataset(Path::new(path), kind);
    }
    let n: usize = map.require("synth-n")?;
    if n == 0 {
        return Err(CliError::config("synth-n must be at least 1"));
    }
    match kind {
        ModelKind::Gaussian => {
            let d: usize = map.require("synth-d")?;
            let mean = map.parse_value("data-mean")?.unwrap_or(0.0);
            let std = map.parse_value("data-std")?.unwrap_or(1.0);
            let noise = map.parse_value("noise-scale")?.unwrap_or(1.0);
            let model = GaussianTarget::synthesize(n, d, mean, std, noise, seed);
            Ok(RawDataset::from_gaussian(&model))
        }
        ModelKind::Logistic => {
            let d: usize = map.require("synth-d")?;
            let alpha = map.parse_value("alpha")?.unwrap_or(1.0);
            let beta_scale = map.parse_value("beta-scale")?.unwrap_or(1.0);
            let model = LogisticRegressionModel::synthesize(n, d, alpha, beta_scale, seed);
            Ok(RawDataset::from_logistic(&model))
        }
        ModelKind::LogNormal => {
            let mu = map.parse_value("mu")?.unwrap_or(0.0);
            let sigma = map.parse_value("sigma")?.unwrap_or(1.0);
            if !(sigma > 0.0) {
                return Err(CliError::config("sigma must be positive"));
            }
            let model = LogNormalModel::synthesize(n, mu, sigma, seed);
            Ok(RawDataset::from_lognormal(&model))
        }
    }
}

/// Binds a dataset to model hyperparameters from the configuration.
pub fn bind_model(
    dataset: RawDataset,
    kind: ModelKind,
    map: &ConfigMap,
) -> Result<BuiltModel, CliError> {
    match kind {
        ModelKind::Gaussian => {
            let noise = map.parse_value("noise-scale")?.unwrap_or(1.0);
            if !(noise > 0.0) {
                return Err(CliError::config("noise-scale must be positive"));
            }
            Ok(BuiltModel::Gaussian(dataset.into_gaussian(noise)?))
        }
        ModelKind::Logistic => {
            let alpha = map.parse_value("alpha")?.unwrap_or(1.0);
            if !(alpha > 0.0) {
                return Err(CliError::config("alpha must be positive"));
            }
            Ok(BuiltModel::Logistic(dataset.into_logistic(alpha)?))
        }
        ModelKind::LogNormal => Ok(BuiltModel::LogNormal(dataset.into_lognormal()?)),
    }
}

/// Deterministic shuffled split of `0..n` into disjoint, exhaustive
/// train/test index sets (sorted within each side).
pub fn split_indices(
    n: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), CliError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CliError::config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let train_size = (train_fraction * n as f64).round() as usize;
    if train_size == 0 || train_size == n {
        return Err(CliError::config(format!(
            "split of {n} rows at fraction {train_fraction} leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = StreamRng::derive(seed, 0, StreamRole::Split);
    // Fisher-Yates.
    for i in (1..n).rev() {
        let j = rng.below(i + 1);
        order.swap(i, j);
    }
    let mut train: Vec<usize> = order[..train_size].to_vec();
    let mut test: Vec<usize> = order[train_size..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Full experiment plan, assembled from a configuration map.
pub struct ExperimentPlan {
    pub kind: ModelKind,
    pub dataset: RawDataset,
    pub settings: ConfigMap,
    pub methods: Vec<Method>,
    pub iterations: usize,
    pub burn_in: Option<usize>,
    pub thin: usize,
    pub replicas: u64,
    pub seed: u64,
    pub metric: MetricKind,
    pub target: Option<f64>,
    pub train_fraction: f64,
    /// Explicit reference point for the MSE metric; when absent an LD
    /// baseline chain supplies the reference mean.
    pub reference: Option<Vec<f64>>,
}

impl ExperimentPlan {
    pub fn from_config(map: ConfigMap) -> Result<Self, CliError> {
        let kind = ModelKind::parse(
            map.get("model")
                .ok_or_else(|| CliError::config("missing required key `model`"))?,
        )?;
        let seed: u64 = map.parse_value("seed")?.unwrap_or(0);
        let dataset = build_dataset(&map, kind, seed)?;

        let methods_raw = map
            .get("methods")
            .ok_or_else(|| CliError::config("missing required key `methods`"))?;
        let mut methods = Vec::new();
        for token in methods_raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let lowered = token.to_ascii_lowercase();
            if lowered == "svrg-ld" || lowered == "svrgld" {
                // Bare SVRG expands over the option grid (default II).
                let options = map.get_scoped("svrg-ld", "option").unwrap_or("2");
                for opt in map.parse_list::<u8>(options, "option")? {
                    methods.push(match opt {
                        1 => Method::SvrgLdI,
                        2 => Method::SvrgLdII,
                        other => {
                            return Err(CliError::config(format!(
                                "option must be 1 or 2, got {other}"
                            )));
                        }
                    });
                }
            } else {
                methods.push(Method::parse(token).ok_or_else(|| {
                    CliError::config(format!("unknown method `{token}`"))
                })?);
            }
        }
        if methods.is_empty() {
            return Err(CliError::config("method list is empty"));
        }

        let metric = MetricKind::parse(map.get("metric").unwrap_or("mse"))?;
        let reference = match map.get("reference") {
            None => None,
            Some(raw) => Some(map.parse_list::<f64>(raw, "reference")?),
        };
        let replicas: u64 = map.parse_value("replicas")?.unwrap_or(1);
        if replicas == 0 {
            return Err(CliError::config("replicas must be at least 1"));
        }

        Ok(Self {
            kind,
            methods,
            iterations: map.require("iters")?,
            burn_in: map.parse_value("burn-in")?,
            thin: map.parse_value("thin")?.unwrap_or(1),
            replicas,
            seed,
            metric,
            target: map.parse_value("target")?,
            train_fraction: map.parse_value("train-fraction")?.unwrap_or(0.8),
            reference,
            dataset,
            settings: map,
        })
    }

    /// Hyperparameter grid for one method, honoring method-scoped keys.
    pub fn grid(&self, method: Method) -> Result<Vec<GridPoint>, CliError> {
        let scope = method.name().to_ascii_lowercase();
        let deltas_raw = self
            .settings
            .get_scoped(&scope, "delta")
            .ok_or_else(|| CliError::config(format!("{method}: missing `delta` grid")))?;
        let deltas: Vec<f64> = self.settings.parse_list(deltas_raw, "delta")?;
        let batches: Vec<usize> = match self.settings.get_scoped(&scope, "batch") {
            Some(raw) => self.settings.parse_list(raw, "batch")?,
            None => vec![10],
        };
        let taus: Vec<Option<usize>> = match method {
            Method::SvrgLdI | Method::SvrgLdII => {
                let raw = self.settings.get_scoped(&scope, "tau").ok_or_else(|| {
                    CliError::config(format!("{method}: missing `tau` grid"))
                })?;
                self.settings
                    .parse_list::<usize>(raw, "tau")?
                    .into_iter()
                    .map(Some)
                    .collect()
            }
            _ => vec![None],
        };
        if deltas.is_empty() || batches.is_empty() || taus.is_empty() {
            return Err(CliError::config(format!("{method}: empty grid")));
        }
        let mut points = Vec::new();
        for &delta in &deltas {
            if !(delta > 0.0) {
                return Err(CliError::config(format!("{method}: delta must be positive")));
            }
            for &batch in &batches {
                for &tau in &taus {
                    points.push(GridPoint { delta, batch, tau });
                }
            }
        }
        points.sort_by(|a, b| a.sort_key().partial_cmp(&b.sort_key()).unwrap());
        Ok(points)
    }
}

/// One results row (a replica run or a per-point aggregate).
#[derive(Clone, Debug)]
pub struct ResultRow {
    pub method: Method,
    pub point: GridPoint,
    /// Replica index, or `None` for the aggregate row.
    pub replica: Option<u64>,
    pub metric: f64,
    /// Passes through the training data; in target mode, the first pass
    /// count at which the running metric crossed the target.
    pub passes: Option<f64>,
    pub queries: f64,
    pub seed: u64,
    /// Standard error of the metric (aggregate rows only).
    pub stderr: Option<f64>,
}

/// Winner of the grid search for one method.
#[derive(Clone, Debug)]
pub struct GridWinner {
    pub method: Method,
    pub point: GridPoint,
    /// Mean metric at the winning point.
    pub metric: f64,
    /// Mean passes(-to-target when a target is set).
    pub passes: Option<f64>,
}

pub struct ExperimentResults {
    pub rows: Vec<ResultRow>,
    pub winners: Vec<GridWinner>,
    /// Grid points dropped because a replica diverged.
    pub failures: Vec<(Method, GridPoint, String)>,
}

struct Prepared {
    train: BuiltModel,
    test: Option<LogisticRegressionModel>,
    exact_posterior: Option<GaussianSummary>,
    reference: Option<Vec<f64>>,
    mode: Option<ModeResult>,
    train_size: usize,
}

fn prepare(plan: &ExperimentPlan) -> Result<Prepared, CliError> {
    // Held-out evaluation needs a labeled split; other metrics use the
    // full dataset.
    let (train_set, test_model) = if plan.metric == MetricKind::Heldout {
        if plan.kind != ModelKind::Logistic {
            return Err(CliError::config(
                "the heldout metric requires the logistic model",
            ));
        }
        let (train_idx, test_idx) =
            split_indices(plan.dataset.rows, plan.train_fraction, plan.seed)?;
        let alpha = plan.settings.parse_value("alpha")?.unwrap_or(1.0);
        let train = plan.dataset.subset(&train_idx);
        let test = plan.dataset.subset(&test_idx).into_logistic(alpha)?;
        (train, Some(test))
    } else {
        (plan.dataset.clone(), None)
    };

    let train = bind_model(train_set, plan.kind, &plan.settings)?;
    let train_size = train.potential().num_components();

    let exact_posterior = match (&train, plan.metric) {
        (BuiltModel::Gaussian(m), MetricKind::W2) => Some(GaussianSummary::isotropic(
            m.posterior_mean(),
            m.posterior_variance(),
        )),
        (_, MetricKind::W2) => {
            return Err(CliError::config(
                "the w2 metric requires the gaussian model (closed-form posterior)",
            ));
        }
        _ => None,
    };

    // MSE reference: explicit vector, or the mean of an LD baseline run.
    let reference = match (plan.metric, &plan.reference) {
        (MetricKind::Mse, Some(r)) => {
            if r.len() != train.potential().dim() {
                return Err(CliError::config("reference dimension mismatch"));
            }
            Some(r.clone())
        }
        (MetricKind::Mse, None) => {
            let delta: f64 = match plan.settings.parse_value("reference-delta")? {
                Some(d) => d,
                None => match train.potential().constants() {
                    Ok(c) => 0.2 / c.smoothness,
                    Err(_) => {
                        return Err(CliError::config(
                            "reference-delta is required for models without smoothness constants",
                        ));
                    }
                },
            };
            let iters: usize = plan
                .settings
                .parse_value("reference-iters")?
                .unwrap_or(plan.iterations.max(1_000));
            let mut config = ChainConfig::new(delta, iters, plan.seed);
            config.replica = REFERENCE_REPLICA;
            let out = run_chain(Method::Ld, train.potential(), &config)?;
            Some(out.samples.mean())
        }
        _ => None,
    };

    // One mode search feeds every CV chain in the experiment.
    let mode = if plan.methods.iter().any(Method::needs_center) {
        let batch: usize = plan.settings.parse_value("mode-batch")?.unwrap_or(10);
        let max_iters: usize = plan
            .settings
            .parse_value("mode-iters")?
            .unwrap_or(50 * train_size.div_ceil(batch.max(1)));
        let mut opts = ModeOptions::new(batch, max_iters, plan.seed);
        opts.step = plan.settings.parse_value("mode-step")?;
        opts.tolerance = plan.settings.parse_value("mode-tol")?;
        let result = saga_sgd_minimize(train.potential(), &opts);
        if result.diverged {
            return Err(CliError::numerical(
                "mode finder diverged; pass a smaller mode-step",
            ));
        }
        Some(result)
    } else {
        None
    };

    Ok(Prepared {
        train,
        test: test_model,
        exact_posterior,
        reference,
        mode,
        train_size,
    })
}

/// Incremental prefix-metric accumulator for crossing detection.
enum MetricAccum<'a> {
    Heldout {
        test: &'a LogisticRegressionModel,
        prob_sums: Vec<f64>,
        count: usize,
    },
    Mse {
        reference: &'a [f64],
        sum: Vec<f64>,
        count: usize,
    },
    W2 {
        exact: &'a GaussianSummary,
        sum: Vec<f64>,
        outer: Vec<f64>,
        count: usize,
    },
}

impl<'a> MetricAccum<'a> {
    fn push(&mut self, row: &[f64]) {
        match self {
            MetricAccum::Heldout {
                test,
                prob_sums,
                count,
            } => {
                for (j, acc) in prob_sums.iter_mut().enumerate() {
                    *acc += metrics::predictive_prob(row, test.row(j), test.label(j));
                }
                *count += 1;
            }
            MetricAccum::Mse { sum, count, .. } => {
                for (s, &v) in sum.iter_mut().zip(row) {
                    *s += v;
                }
                *count += 1;
            }
            MetricAccum::W2 {
                sum, outer, count, ..
            } => {
                let d = row.len();
                for (s, &v) in sum.iter_mut().zip(row) {
                    *s += v;
                }
                for i in 0..d {
                    for j in 0..d {
                        outer[i * d + j] += row[i] * row[j];
                    }
                }
                *count += 1;
            }
        }
    }

    fn value(&self) -> Option<f64> {
        match self {
            MetricAccum::Heldout {
                prob_sums, count, ..
            } => {
                if *count == 0 {
                    return None;
                }
                let n = *count as f64;
                let mut total = 0.0;
                for &acc in prob_sums {
                    total += (acc.max(1e-300) / n).ln();
                }
                Some(total)
            }
            MetricAccum::Mse {
                reference,
                sum,
                count,
            } => {
                if *count == 0 {
                    return None;
                }
                let n = *count as f64;
                Some(
                    sum.iter()
                        .zip(reference.iter())
                        .map(|(&s, &r)| (s / n - r) * (s / n - r))
                        .sum(),
                )
            }
            MetricAccum::W2 {
                exact,
                sum,
                outer,
                count,
            } => {
                if *count < 2 {
                    return None;
                }
                let d = sum.len();
                let n = *count as f64;
                let mean: Vec<f64> = sum.iter().map(|&s| s / n).collect();
                let mut cov = vec![0.0; d * d];
                for i in 0..d {
                    for j in 0..d {
                        cov[i * d + j] =
                            (outer[i * d + j] - n * mean[i] * mean[j]) / (n - 1.0);
                    }
                }
                let summary = GaussianSummary::new(mean, cov);
                metrics::w2_gaussian(&summary, exact).ok()
            }
        }
    }
}

fn new_accum<'a>(prepared: &'a Prepared, plan: &ExperimentPlan, dim: usize) -> MetricAccum<'a> {
    match plan.metric {
        MetricKind::Heldout => {
            use vrlmc_core::potentials::SumPotential;
            let test = prepared.test.as_ref().expect("heldout needs a test split");
            MetricAccum::Heldout {
                prob_sums: vec![0.0; test.num_components()],
                test,
                count: 0,
            }
        }
        MetricKind::Mse => MetricAccum::Mse {
            reference: prepared.reference.as_deref().expect("mse needs a reference"),
            sum: vec![0.0; dim],
            count: 0,
        },
        MetricKind::W2 => MetricAccum::W2 {
            exact: prepared
                .exact_posterior
                .as_ref()
                .expect("w2 needs the exact posterior"),
            sum: vec![0.0; dim],
            outer: vec![0.0; dim * dim],
            count: 0,
        },
    }
}

/// Final (full-sample) metric through the canonical metric functions.
fn final_metric(
    prepared: &Prepared,
    plan: &ExperimentPlan,
    output: &ChainOutput,
) -> Result<f64, CliError> {
    match plan.metric {
        MetricKind::Heldout => {
            let test = prepared.test.as_ref().expect("heldout needs a test split");
            Ok(metrics::heldout_log_prob(test, &output.samples)?)
        }
        MetricKind::Mse => {
            let reference = prepared.reference.as_deref().expect("mse needs a reference");
            Ok(metrics::mse(&output.samples, reference)?)
        }
        MetricKind::W2 => {
            let exact = prepared
                .exact_posterior
                .as_ref()
                .expect("w2 needs the exact posterior");
            let summary = GaussianSummary::from_samples(&output.samples)?;
            Ok(metrics::w2_gaussian(&summary, exact)?)
        }
    }
}

/// Scans the kept samples and returns the pass count at which the running
/// metric first reaches `target`.
fn passes_to_target(
    prepared: &Prepared,
    plan: &ExperimentPlan,
    method: Method,
    point: GridPoint,
    output: &ChainOutput,
    mode_queries: u64,
    target: f64,
) -> Option<f64> {
    let kept = output.samples.rows();
    if kept == 0 {
        return None;
    }
    let mut accum = new_accum(prepared, plan, output.samples.cols());
    let stride = (kept / 256).max(1);
    let n = prepared.train_size;
    for r in 0..kept {
        accum.push(output.samples.row(r));
        if r % stride == 0 || r + 1 == kept {
            if let Some(value) = accum.value() {
                if plan.metric.reaches(value, target) {
                    let iterations_done = output.burn_in + r * output.thin + 1;
                    let queries = queries_after(method, iterations_done, n, point.batch, point.tau)
                        + mode_queries;
                    return Some(queries as f64 / n as f64);
                }
            }
        }
    }
    None
}

/// Runs the full experiment: every (method, grid point, replica) chain,
/// metric evaluation, aggregation, and grid winners.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentResults, CliError> {
    let prepared = prepare(plan)?;

    struct WorkItem {
        method: Method,
        point: GridPoint,
        replica: u64,
    }
    let mut items = Vec::new();
    let mut grids = Vec::new();
    for &method in &plan.methods {
        let grid = plan.grid(method)?;
        for &point in &grid {
            for replica in 0..plan.replicas {
                items.push(WorkItem {
                    method,
                    point,
                    replica,
                });
            }
        }
        grids.push((method, grid));
    }

    let mode_queries = prepared.mode.as_ref().map_or(0, |m| m.gradient_queries);
    let outcomes: Vec<Result<ResultRow, (Method, GridPoint, String)>> = items
        .par_iter()
        .map(|item| {
            let mut config = ChainConfig::new(item.point.delta, plan.iterations, plan.seed);
            config.batch_size = item.point.batch;
            config.epoch_length = item.point.tau;
            config.burn_in = plan.burn_in;
            config.thin = plan.thin;
            config.replica = item.replica;
            if item.method.needs_center() {
                config.center = prepared.mode.as_ref().map(|m| m.x_star.clone());
            }
            let output = run_chain(item.method, prepared.train.potential(), &config)
                .map_err(|e| (item.method, item.point, e.to_string()))?;
            let metric = final_metric(&prepared, plan, &output)
                .map_err(|e| (item.method, item.point, e.to_string()))?;
            let extra = if item.method.needs_center() { mode_queries } else { 0 };
            let queries = output.gradient_queries + extra;
            let passes = match plan.target {
                None => Some(queries as f64 / prepared.train_size as f64),
                Some(target) => passes_to_target(
                    &prepared,
                    plan,
                    item.method,
                    item.point,
                    &output,
                    extra,
                    target,
                ),
            };
            Ok(ResultRow {
                method: item.method,
                point: item.point,
                replica: Some(item.replica),
                metric,
                passes,
                queries: queries as f64,
                seed: plan.seed,
                stderr: None,
            })
        })
        .collect();

    // Points with any failed replica are dropped from the table and the
    // winner selection.
    let mut failures: Vec<(Method, GridPoint, String)> = Vec::new();
    let mut ok_rows: Vec<ResultRow> = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(row) => ok_rows.push(row),
            Err(failure) => {
                if !failures
                    .iter()
                    .any(|(m, p, _)| *m == failure.0 && *p == failure.1)
                {
                    failures.push(failure);
                }
            }
        }
    }
    let failed = |method: Method, point: GridPoint| {
        failures.iter().any(|(m, p, _)| *m == method && *p == point)
    };

    let mut rows = Vec::new();
    let mut winners = Vec::new();
    for (method, grid) in &grids {
        let mut best: Option<GridWinner> = None;
        let mut any_point_survived = false;
        for &point in grid {
            if failed(*method, point) {
                continue;
            }
            let replicas: Vec<&ResultRow> = ok_rows
                .iter()
                .filter(|r| r.method == *method && r.point == point)
                .collect();
            if replicas.is_empty() {
                continue;
            }
            any_point_survived = true;
            for row in &replicas {
                rows.push((*row).clone());
            }

            let r = replicas.len() as f64;
            let metric_mean = replicas.iter().map(|x| x.metric).sum::<f64>() / r;
            let stderr = if replicas.len() > 1 {
                let var = replicas
                    .iter()
                    .map(|x| (x.metric - metric_mean) * (x.metric - metric_mean))
                    .sum::<f64>()
                    / (r - 1.0);
                (var / r).sqrt()
            } else {
                0.0
            };
            let queries_mean = replicas.iter().map(|x| x.queries).sum::<f64>() / r;
            // Mean passes; in target mode a single not-reached replica
            // makes the point's passes undefined.
            let passes_mean = if replicas.iter().all(|x| x.passes.is_some()) {
                Some(replicas.iter().map(|x| x.passes.unwrap()).sum::<f64>() / r)
            } else {
                None
            };
            rows.push(ResultRow {
                method: *method,
                point,
                replica: None,
                metric: metric_mean,
                passes: passes_mean,
                queries: queries_mean,
                seed: plan.seed,
                stderr: Some(stderr),
            });

            let candidate = GridWinner {
                method: *method,
                point,
                metric: metric_mean,
                passes: passes_mean,
            };
            let improves = match &best {
                None => true,
                Some(cur) => match plan.target {
                    None => plan.metric.better(metric_mean, cur.metric),
                    Some(_) => match (passes_mean, cur.passes) {
                        (Some(a), Some(b)) => a < b,
                        (Some(_), None) => true,
                        _ => false,
                    },
                },
            };
            if improves {
                best = Some(candidate);
            }
        }
        if !any_point_survived {
            return Err(CliError::numerical(format!(
                "all grid points failed for {method}"
            )));
        }
        if let Some(winner) = best {
            winners.push(winner);
        }
    }

    Ok(ExperimentResults {
        rows,
        winners,
        failures,
    })
}

/// Renders the results table:
/// `method,delta,n,tau,replica,metric,passes,queries,seed,stderr`.
pub fn render_results(results: &ExperimentResults) -> String {
    let mut out = String::from("method,delta,n,tau,replica,metric,passes,queries,seed,stderr\n");
    for row in &results.rows {
        let tau = row.point.tau.map_or(String::new(), |t| t.to_string());
        let replica = row
            .replica
            .map_or_else(|| "agg".to_string(), |r| r.to_string());
        let passes = row
            .passes
            .map_or_else(|| "not_reached".to_string(), |p| p.to_string());
        let stderr = row.stderr.map_or(String::new(), |s| s.to_string());
        let _ = writeln!(
            out,
            "{},{},{},{tau},{replica},{},{passes},{},{},{stderr}",
            row.method, row.point.delta, row.point.batch, row.metric, row.queries, row.seed
        );
    }
    out
}

/// Runs the experiment and writes the results CSV plus the resolved
/// configuration echo. Returns the results and the output path.
pub fn run_experiment_to_files(
    plan: &ExperimentPlan,
    out_path: &Path,
) -> Result<(ExperimentResults, PathBuf), CliError> {
    let results = run_experiment(plan)?;
    std::fs::write(out_path, render_results(&results))?;
    plan.settings.write_echo(out_path)?;
    Ok((results, out_path.to_path_buf()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_deterministic_disjoint_exhaustive() {
        let (train_a, test_a) = split_indices(10, 0.8, 7).unwrap();
        let (train_b, test_b) = split_indices(10, 0.8, 7).unwrap();
        assert_eq!(train_a, train_b);
        assert_eq!(test_a, test_b);
        assert_eq!(train_a.len(), 8);
        assert_eq!(test_a.len(), 2);
        let mut union: Vec<usize> = train_a.iter().chain(&test_a).copied().collect();
        union.sort_unstable();
        assert_eq!(union, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn split_rejects_degenerate_fractions() {
        assert!(split_indices(10, 0.0, 1).is_err());
        assert!(split_indices(10, 1.0, 1).is_err());
        assert!(split_indices(3, 0.05, 1).is_err());
    }

    #[test]
    fn different_seeds_shuffle_differently() {
        let (a, _) = split_indices(100, 0.5, 1).unwrap();
        let (b, _) = split_indices(100, 0.5, 2).unwrap();
        assert_ne!(a, b);
    }
}
