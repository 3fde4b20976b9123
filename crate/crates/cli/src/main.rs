//! `vrlmc`: variance-reduced Langevin Monte Carlo samplers, bound
//! evaluators, and a grid-search experiment harness.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vrlmc_cli::config::ConfigMap;
use vrlmc_cli::dataio::{self, ModelKind};
use vrlmc_cli::experiment::{
    self, ExperimentPlan, build_dataset, bind_model, run_experiment_to_files,
};
use vrlmc_cli::CliError;
use vrlmc_core::optimizer::{ModeOptions, saga_sgd_minimize};
use vrlmc_core::samplers::{ChainConfig, Method, run_chain};
use vrlmc_core::theory::{
    BoundInputs, ComplexityQuery, SvrgBoundOption, complexity_predict, cvuld_bound,
    regime_classify, saga_bound, sgld_bound, svrg_bound,
};

#[derive(Parser)]
#[command(
    name = "vrlmc",
    about = "Variance-reduced stochastic-gradient Langevin Monte Carlo",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; file values are overridden by flags.
#[derive(Args)]
struct Shared {
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for all derived random streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset CSV.
    Datagen(DatagenArgs),
    /// Run one sampling chain and dump the kept iterates.
    Sample(SampleArgs),
    /// Locate the approximate posterior mode with SAGA-SGD.
    Minimize(MinimizeArgs),
    /// Replicated grid-search experiment with metric tracking.
    Experiment(ExperimentArgs),
    /// Evaluate a convergence bound.
    Bound(BoundArgs),
    /// Predict mixing time and computation for a method.
    Predict(PredictArgs),
    /// Classify which method a target accuracy favors.
    Regime(RegimeArgs),
}

#[derive(Args)]
struct DatagenArgs {
    #[command(flatten)]
    shared: Shared,
    /// Dataset kind: gaussian, logistic, or lognormal.
    #[arg(long)]
    kind: Option<String>,
    /// Number of rows.
    #[arg(long)]
    n: Option<usize>,
    /// Feature dimension (gaussian/logistic).
    #[arg(long)]
    d: Option<usize>,
    /// Gaussian observation noise scale.
    #[arg(long)]
    noise_scale: Option<f64>,
    /// Gaussian data mean.
    #[arg(long)]
    data_mean: Option<f64>,
    /// Gaussian data spread.
    #[arg(long)]
    data_std: Option<f64>,
    /// Scale of the ground-truth coefficients (logistic).
    #[arg(long)]
    beta_scale: Option<f64>,
    /// Log-normal location.
    #[arg(long)]
    mu: Option<f64>,
    /// Log-normal scale.
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    shared: Shared,
    /// Model kind: gaussian, logistic, or lognormal.
    #[arg(long)]
    model: Option<String>,
    /// Dataset CSV path.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Sampling method (ld, uld, sgld, sguld, saga-ld, svrg-ld, cv-ld, cv-uld).
    #[arg(long)]
    method: Option<String>,
    /// Step size.
    #[arg(long)]
    delta: Option<f64>,
    /// Mini-batch size.
    #[arg(long)]
    batch: Option<usize>,
    /// SVRG epoch length.
    #[arg(long)]
    tau: Option<usize>,
    /// SVRG anchor option (1 or 2).
    #[arg(long)]
    option: Option<u8>,
    /// Iteration count.
    #[arg(long)]
    iters: Option<usize>,
    /// Burn-in iterations (default: 10% of iters).
    #[arg(long)]
    burn_in: Option<usize>,
    /// Keep every thin-th iterate.
    #[arg(long)]
    thin: Option<usize>,
    /// Also write velocity columns (underdamped methods).
    #[arg(long)]
    emit_velocity: bool,
    /// Gaussian observation noise scale.
    #[arg(long)]
    noise_scale: Option<f64>,
    /// Logistic prior variance.
    #[arg(long)]
    alpha: Option<f64>,
    /// Synthesize this many rows instead of loading --data.
    #[arg(long)]
    synth_n: Option<usize>,
    /// Synthetic feature dimension.
    #[arg(long)]
    synth_d: Option<usize>,
}

#[derive(Args)]
struct MinimizeArgs {
    #[command(flatten)]
    shared: Shared,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Mini-batch size.
    #[arg(long)]
    batch: Option<usize>,
    /// Step size (default 1/(2M) when constants exist).
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Gradient-norm tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Check the full gradient every this many steps.
    #[arg(long)]
    check_every: Option<usize>,
    #[arg(long)]
    noise_scale: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    synth_n: Option<usize>,
    #[arg(long)]
    synth_d: Option<usize>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    shared: Shared,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Comma-separated method list.
    #[arg(long)]
    methods: Option<String>,
    /// Comma-separated step-size grid.
    #[arg(long)]
    delta: Option<String>,
    /// Comma-separated batch-size grid.
    #[arg(long)]
    batch: Option<String>,
    /// Comma-separated epoch-length grid (SVRG).
    #[arg(long)]
    tau: Option<String>,
    /// Comma-separated SVRG option grid (1,2).
    #[arg(long)]
    option: Option<String>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    /// Independent replicas per grid point.
    #[arg(long)]
    replicas: Option<u64>,
    /// Target metric: heldout, mse, or w2.
    #[arg(long)]
    metric: Option<String>,
    /// Report passes-to-target against this metric value.
    #[arg(long)]
    target: Option<f64>,
    /// Train fraction for the held-out split.
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    noise_scale: Option<f64>,
    #[arg(long)]
    synth_n: Option<usize>,
    #[arg(long)]
    synth_d: Option<usize>,
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    shared: Shared,
    /// Which bound: sgld, saga, svrg-1, svrg-2, or cvuld.
    #[arg(long)]
    alg: String,
    #[arg(long)]
    dim: Option<usize>,
    /// Number of data components N.
    #[arg(long)]
    data_size: Option<usize>,
    /// Strong convexity m.
    #[arg(long)]
    m: Option<f64>,
    /// Smoothness M.
    #[arg(long)]
    big_m: Option<f64>,
    /// Hessian Lipschitz constant L.
    #[arg(long)]
    l: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Iteration count T.
    #[arg(long)]
    iters: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    tau: Option<usize>,
    /// Gradient-noise scale sigma (SGLD bound).
    #[arg(long)]
    sigma: Option<f64>,
    /// Initial Wasserstein distance W2(p0, p*).
    #[arg(long)]
    w2_init: Option<f64>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    shared: Shared,
    /// Method name (one of the nine algorithms).
    #[arg(long)]
    alg: String,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    data_size: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
struct RegimeArgs {
    #[command(flatten)]
    shared: Shared,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    data_size: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Datagen(args) => cmd_datagen(args),
        Command::Sample(args) => cmd_sample(args),
        Command::Minimize(args) => cmd_minimize(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Bound(args) => cmd_bound(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Regime(args) => cmd_regime(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("vrlmc: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn load_shared(shared: &Shared) -> Result<ConfigMap, CliError> {
    let mut map = match &shared.config {
        Some(path) => ConfigMap::load(path)?,
        None => ConfigMap::new(),
    };
    map.set_if_some("seed", &shared.seed);
    if let Some(out) = &shared.out {
        map.set("out", out.display());
    }
    Ok(map)
}

fn require_out(map: &ConfigMap) -> Result<PathBuf, CliError> {
    map.get("out")
        .map(PathBuf::from)
        .ok_or_else(|| CliError::config("missing required key `out`"))
}

fn cmd_datagen(args: DatagenArgs) -> Result<(), CliError> {
    let mut map = load_shared(&args.shared)?;
    map.set_if_some("kind", &args.kind);
    map.set_if_some("synth-n", &args.n);
    map.set_if_some("synth-d", &args.d);
    map.set_if_some("noise-scale", &args.noise_scale);
    map.set_if_some("data-mean", &args.data_mean);
    map.set_if_some("data-std", &args.data_std);
    map.set_if_some("beta-scale", &args.beta_scale);
    map.set_if_some("mu", &args.mu);
    map.set_if_some("sigma", &args.sigma);

    let kind = ModelKind::parse(
        map.get("kind")
            .ok_or_else(|| CliError::config("missing required key `kind`"))?,
    )?;
    let seed: u64 = map.parse_value("seed")?.unwrap_or(0);
    let out = require_out(&map)?;
    let dataset = build_dataset(&map, kind, seed)?;
    dataio::write_dataset(&out, &dataset)?;
    println!(
        "wrote {} {} rows (dim {}) to {}",
        dataset.rows,
        kind.name(),
        dataset.dim,
        out.display()
    );
    Ok(())
}

/// Applies the model/data flags shared by sample and minimize.
fn apply_model_flags(
    map: &mut ConfigMap,
    model: &Option<String>,
    data: &Option<PathBuf>,
    noise_scale: &Option<f64>,
    alpha: &Option<f64>,
    synth_n: &Option<usize>,
    synth_d: &Option<usize>,
) {
    map.set_if_some("model", model);
    if let Some(path) = data {
        map.set("data", path.display());
    }
    map.set_if_some("noise-scale", noise_scale);
    map.set_if_some("alpha", alpha);
    map.set_if_some("synth-n", synth_n);
    map.set_if_some("synth-d", synth_d);
}

fn build_model_from_map(map: &ConfigMap) -> Result<experiment::BuiltModel, CliError> {
    let kind = ModelKind::parse(
        map.get("model")
            .ok_or_else(|| CliError::config("missing required key `model`"))?,
    )?;
    let seed: u64 = map.parse_value("seed")?.unwrap_or(0);
    let dataset = build_dataset(map, kind, seed)?;
    bind_model(dataset, kind, map)
}

fn cmd_sample(args: SampleArgs) -> Result<(), CliError> {
    let mut map = load_shared(&args.shared)?;
    apply_model_flags(
        &mut map,
        &args.model,
        &args.data,
        &args.noise_scale,
        &args.alpha,
        &args.synth_n,
        &args.synth_d,
    );
    map.set_if_some("method", &args.method);
    map.set_if_some("delta", &args.delta);
    map.set_if_some("batch", &args.batch);
    map.set_if_some("tau", &args.tau);
    map.set_if_some("option", &args.option);
    map.set_if_some("iters", &args.iters);
    map.set_if_some("burn-in", &args.burn_in);
    map.set_if_some("thin", &args.thin);
    if args.emit_velocity {
        map.set("emit-velocity", "true");
    }

    let model = build_model_from_map(&map)?;
    let method_name = map
        .get("method")
        .ok_or_else(|| CliError::config("missing required key `method`"))?;
    let method = parse_method_with_option(method_name, map.parse_value::<u8>("option")?)?;

    let mut config = ChainConfig::new(
        map.require::<f64>("delta")?,
        map.require::<usize>("iters")?,
        map.parse_value("seed")?.unwrap_or(0),
    );
    config.batch_size = map.parse_value("batch")?.unwrap_or(10);
    config.epoch_length = map.parse_value("tau")?;
    config.burn_in = map.parse_value("burn-in")?;
    config.thin = map.parse_value("thin")?.unwrap_or(1);
    config.record_velocity = map.get("emit-velocity") == Some("true");

    // Control-variate methods center on the approximate mode.
    if method.needs_center() {
        let mut opts = ModeOptions::new(
            config.batch_size,
            map.parse_value("mode-iters")?.unwrap_or(50_000),
            config.seed,
        );
        opts.step = map.parse_value("mode-step")?;
        opts.tolerance = map.parse_value("mode-tol")?;
        let mode = saga_sgd_minimize(model.potential(), &opts);
        if mode.diverged {
            return Err(CliError::numerical("mode finder diverged"));
        }
        eprintln!(
            "mode finder: grad norm {:.3e} after {} iterations (converged: {})",
            mode.grad_norm, mode.iterations, mode.converged
        );
        config.center = Some(mode.x_star);
    }

    let out = require_out(&map)?;
    let output = run_chain(method, model.potential(), &config)?;
    dataio::write_samples(&out, &output)?;
    println!(
        "{}: kept {} of {} iterations, {} gradient queries ({:.3} passes), wrote {}",
        method,
        output.samples.rows(),
        output.iterations,
        output.gradient_queries,
        output.passes(model.potential().num_components()),
        out.display()
    );
    Ok(())
}

fn parse_method_with_option(name: &str, option: Option<u8>) -> Result<Method, CliError> {
    let lowered = name.trim().to_ascii_lowercase();
    if lowered == "svrg-ld" || lowered == "svrgld" {
        return match option {
            Some(1) => Ok(Method::SvrgLdI),
            Some(2) | None => Ok(Method::SvrgLdII),
            Some(other) => Err(CliError::config(format!(
                "option must be 1 or 2, got {other}"
            ))),
        };
    }
    Method::parse(name).ok_or_else(|| CliError::config(format!("unknown method `{name}`")))
}

fn cmd_minimize(args: MinimizeArgs) -> Result<(), CliError> {
    let mut map = load_shared(&args.shared)?;
    apply_model_flags(
        &mut map,
        &args.model,
        &args.data,
        &args.noise_scale,
        &args.alpha,
        &args.synth_n,
        &args.synth_d,
    );
    map.set_if_some("batch", &args.batch);
    map.set_if_some("mode-step", &args.step);
    map.set_if_some("mode-iters", &args.max_iters);
    map.set_if_some("mode-tol", &args.tol);
    map.set_if_some("check-every", &args.check_every);

    let model = build_model_from_map(&map)?;
    let mut opts = ModeOptions::new(
        map.parse_value("batch")?.unwrap_or(10),
        map.parse_value("mode-iters")?.unwrap_or(50_000),
        map.parse_value("seed")?.unwrap_or(0),
    );
    opts.step = map.parse_value("mode-step")?;
    opts.tolerance = map.parse_value("mode-tol")?;
    opts.check_every = map.parse_value("check-every")?;

    let result = saga_sgd_minimize(model.potential(), &opts);
    if result.diverged {
        return Err(CliError::numerical(format!(
            "mode finder diverged after {} iterations; reduce --step",
            result.iterations
        )));
    }
    println!(
        "mode: grad norm {:.6e} after {} iterations ({} gradient queries, converged: {})",
        result.grad_norm, result.iterations, result.gradient_queries, result.converged
    );
    println!(
        "x* = [{}]",
        result
            .x_star
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(", ")
    );
    if let Some(out) = map.get("out") {
        dataio::write_vector(Path::new(out), &result.x_star)?;
    }
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<(), CliError> {
    let mut map = load_shared(&args.shared)?;
    apply_model_flags(
        &mut map,
        &args.model,
        &args.data,
        &args.noise_scale,
        &args.alpha,
        &args.synth_n,
        &args.synth_d,
    );
    map.set_if_some("methods", &args.methods);
    map.set_if_some("delta", &args.delta);
    map.set_if_some("batch", &args.batch);
    map.set_if_some("tau", &args.tau);
    map.set_if_some("option", &args.option);
    map.set_if_some("iters", &args.iters);
    map.set_if_some("burn-in", &args.burn_in);
    map.set_if_some("thin", &args.thin);
    map.set_if_some("replicas", &args.replicas);
    map.set_if_some("metric", &args.metric);
    map.set_if_some("target", &args.target);
    map.set_if_some("train-fraction", &args.train_fraction);

    let out = require_out(&map)?;
    let plan = ExperimentPlan::from_config(map)?;
    let (results, path) = run_experiment_to_files(&plan, &out)?;

    for (method, point, reason) in &results.failures {
        eprintln!(
            "dropped {method} delta={} n={} tau={:?}: {reason}",
            point.delta, point.batch, point.tau
        );
    }
    for winner in &results.winners {
        let passes = winner
            .passes
            .map_or_else(|| "not_reached".to_string(), |p| format!("{p:.3}"));
        println!(
            "{}: best delta={} n={}{} {}={:.6} passes={passes}",
            winner.method,
            winner.point.delta,
            winner.point.batch,
            winner
                .point
                .tau
                .map_or(String::new(), |t| format!(" tau={t}")),
            plan.metric.name(),
            winner.metric
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_bound(args: BoundArgs) -> Result<(), CliError> {
    let mut map = load_shared(&args.shared)?;
    map.set_if_some("dim", &args.dim);
    map.set_if_some("data-size", &args.data_size);
    map.set_if_some("m", &args.m);
    map.set_if_some("big-m", &args.big_m);
    map.set_if_some("l", &args.l);
    map.set_if_some("delta", &args.delta);
    map.set_if_some("iters", &args.iters);
    map.set_if_some("batch", &args.batch);
    map.set_if_some("tau", &args.tau);
    map.set_if_some("sigma", &args.sigma);
    map.set_if_some("w2-init", &args.w2_init);

    let inputs = BoundInputs {
        dim: map.require("dim")?,
        data_size: map.parse_value("data-size")?.unwrap_or(1),
        strong_convexity: map.require("m")?,
        smoothness: map.require("big-m")?,
        hessian_lipschitz: map.parse_value("l")?.unwrap_or(0.0),
        step_size: map.require("delta")?,
        iterations: map.require("iters")?,
        batch_size: map.parse_value("batch")?.unwrap_or(1),
        epoch_length: map.parse_value("tau")?,
        noise_scale: map.parse_value("sigma")?,
        w2_init: map.parse_value("w2-init")?.unwrap_or(0.0),
    };

    let to_cli = |e: vrlmc_core::theory::TheoryError| CliError::config(e.to_string());
    let (value, ok, violations) = match args.alg.to_ascii_lowercase().as_str() {
        "sgld" => (sgld_bound(&inputs).map_err(to_cli)?, true, Vec::new()),
        "saga" | "saga-ld" => {
            let b = saga_bound(&inputs);
            (b.value, b.preconditions_met, b.violations)
        }
        "svrg-1" | "svrg-ld-1" | "svrg1" => {
            let b = svrg_bound(&inputs, SvrgBoundOption::I).map_err(to_cli)?;
            (b.value, b.preconditions_met, b.violations)
        }
        "svrg-2" | "svrg-ld-2" | "svrg2" => {
            let b = svrg_bound(&inputs, SvrgBoundOption::II).map_err(to_cli)?;
            (b.value, b.preconditions_met, b.violations)
        }
        "cvuld" | "cv-uld" => {
            let b = cvuld_bound(&inputs);
            (b.value, b.preconditions_met, b.violations)
        }
        other => {
            return Err(CliError::config(format!(
                "unknown bound `{other}` (expected sgld, saga, svrg-1, svrg-2, or cvuld)"
            )));
        }
    };
    println!("value = {value}");
    println!("preconditions_met = {ok}");
    for violation in violations {
        println!("violated: {violation}");
    }
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<(), CliError> {
    let mut map = load_shared(&args.shared)?;
    map.set_if_some("kappa", &args.kappa);
    map.set_if_some("dim", &args.dim);
    map.set_if_some("data-size", &args.data_size);
    map.set_if_some("batch", &args.batch);
    map.set_if_some("epsilon", &args.epsilon);

    let algorithm = Method::parse(&args.alg)
        .ok_or_else(|| CliError::config(format!("unknown method `{}`", args.alg)))?;
    let query = ComplexityQuery {
        algorithm,
        kappa: map.require("kappa")?,
        dim: map.require("dim")?,
        data_size: map.require("data-size")?,
        batch_size: map.parse_value("batch")?.unwrap_or(1),
        epsilon: map.require("epsilon")?,
    };
    if !(query.epsilon > 0.0 && query.epsilon <= 1.0) {
        return Err(CliError::config("epsilon must lie in (0, 1]"));
    }
    if query.kappa < 1.0 {
        return Err(CliError::config("kappa must be at least 1"));
    }
    let prediction = complexity_predict(&query);
    println!("algorithm = {algorithm}");
    println!("mixing_time = {} (predicted order)", prediction.mixing_time);
    println!("computation = {} (predicted order)", prediction.computation);
    Ok(())
}

fn cmd_regime(args: RegimeArgs) -> Result<(), CliError> {
    let mut map = load_shared(&args.shared)?;
    map.set_if_some("dim", &args.dim);
    map.set_if_some("data-size", &args.data_size);
    map.set_if_some("epsilon", &args.epsilon);

    let dim: usize = map.require("dim")?;
    let data_size: usize = map.require("data-size")?;
    let epsilon: f64 = map.require("epsilon")?;
    if !(epsilon > 0.0) {
        return Err(CliError::config("epsilon must be positive"));
    }
    let regime = regime_classify(dim, data_size, epsilon);
    println!("{regime}");
    Ok(())
}
