//! Command-line front end for the experiment harness.
//!
//! Exit codes: 0 success, 1 validation error, 2 runtime/IO error,
//! 3 optimizer divergence. Every error path also prints a machine-parsable
//! `error_code=N` line on standard output; successful experiment runs print
//! the emitted file manifest, one path per line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use vrstab::bounds::{select_params, Regime};
use vrstab::data::parse_libsvm;
use vrstab::harness::{
    emit_convergence, emit_epr, emit_stability, run_convergence, run_coupled_stability,
    run_epr_sweep, ConvergenceConfig, EprConfig, HarnessError, StabilityConfig,
};
use vrstab::losses::{
    check_coercivity, check_convexity_lower_bound, check_self_bounding, LossKind, LossModel,
};
use vrstab::optim::{Method, OptimError};

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "vrstab",
    version,
    about = "Variance-reduced optimizers with stability, convergence, and excess-risk experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Path to the JSON experiment configuration (required by the
    /// experiment subcommands).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override a config field before validation; repeatable, dotted keys
    /// reach nested objects (e.g. --set source.train_n=500). Later
    /// occurrences win.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Directory for emitted result files.
    #[arg(long, global = true, default_value = "out", value_name = "DIR")]
    out: PathBuf,

    /// Override the replicate count (pairs per sample size for `epr`).
    #[arg(long, global = true, value_name = "N")]
    replicates: Option<usize>,

    /// Override the base seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Worker threads for replicate execution (default: all cores).
    #[arg(long, global = true, env = "VRSTAB_WORKERS", value_name = "N")]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a coupled stability experiment from a JSON config.
    Stability,
    /// Run a convergence experiment against the gradient-descent oracle.
    Convergence,
    /// Run an excess-population-risk sweep over sample sizes.
    Epr,
    /// Verify the loss-model inequalities on a dataset file.
    CheckLosses(CheckLossesArgs),
    /// Parse a LIBSVM-format file and print a summary.
    ParseData {
        /// Dataset file to parse.
        path: PathBuf,
    },
    /// Print the selected algorithm parameters for a regime.
    SelectParams(SelectParamsArgs),
}

#[derive(Args)]
struct CheckLossesArgs {
    /// Dataset file (LIBSVM format) providing the examples.
    #[arg(long, value_name = "PATH")]
    data: PathBuf,
    /// Which loss to check.
    #[arg(long, value_enum, default_value_t = LossArg::All)]
    loss: LossArg,
    /// ℓ2 regularization coefficient.
    #[arg(long, default_value_t = 0.0)]
    l2: f64,
    /// Smoothing width δ for the width-parameterized losses.
    #[arg(long, default_value_t = 1.0)]
    width: f64,
    /// Random (w, z) pairs per inequality.
    #[arg(long, default_value_t = 10_000)]
    pairs: usize,
    /// Seed for the sampled pairs.
    #[arg(long, default_value_t = 0)]
    check_seed: u64,
}

#[derive(Args)]
struct SelectParamsArgs {
    #[arg(long, value_enum)]
    regime: RegimeArg,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Training-set size n.
    #[arg(long)]
    n: usize,
    /// Initial risk L(w₁) driving the convex step-size rule.
    #[arg(long, default_value_t = 1.0)]
    initial_risk: f64,
    /// Certified smoothness constant α.
    #[arg(long)]
    alpha: f64,
    /// Strong convexity constant μ (required by the strongly convex regime).
    #[arg(long)]
    mu: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LossArg {
    All,
    Logistic,
    LeastSquares,
    SmoothedHinge,
    Huber,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Convex,
    StronglyConvex,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Svrg,
    Saga,
    Sgd,
}

impl From<RegimeArg> for Regime {
    fn from(value: RegimeArg) -> Self {
        match value {
            RegimeArg::Convex => Regime::Convex,
            RegimeArg::StronglyConvex => Regime::StronglyConvex,
        }
    }
}

impl From<MethodArg> for Method {
    fn from(value: MethodArg) -> Self {
        match value {
            MethodArg::Svrg => Method::Svrg,
            MethodArg::Saga => Method::Saga,
            MethodArg::Sgd => Method::Sgd,
        }
    }
}

/// A classified failure: the message goes to stderr, the code to the
/// `error_code=` line and the process exit status.
struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            println!("error_code={}", f.code);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Stability => run_stability_cmd(cli),
        Command::Convergence => run_convergence_cmd(cli),
        Command::Epr => run_epr_cmd(cli),
        Command::CheckLosses(args) => run_check_losses(args),
        Command::ParseData { path } => run_parse_data(path),
        Command::SelectParams(args) => run_select_params(args),
    }
}

// ---------------------------------------------------------------------------
// Config loading and overrides
// ---------------------------------------------------------------------------

/// Loads the JSON config, applies `--set` overrides in order, then the
/// dedicated flag overrides (`--replicates` writes `replicates_key`,
/// `--seed` writes `base_seed`).
fn load_config_value(cli: &Cli, replicates_key: &str) -> Result<Value, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| fail(EXIT_VALIDATION, "--config PATH is required for this subcommand"))?;
    let text = std::fs::read_to_string(path).map_err(|e| {
        fail(EXIT_RUNTIME, format!("cannot read config {}: {e}", path.display()))
    })?;
    let mut value: Value = serde_json::from_str(&text).map_err(|e| {
        fail(EXIT_VALIDATION, format!("config {} is not valid JSON: {e}", path.display()))
    })?;
    if !value.is_object() {
        return Err(fail(
            EXIT_VALIDATION,
            format!("config {} must be a JSON object", path.display()),
        ));
    }
    for spec in &cli.set {
        apply_override(&mut value, spec)?;
    }
    if let Some(r) = cli.replicates {
        set_path(&mut value, replicates_key, Value::from(r));
    }
    if let Some(s) = cli.seed {
        set_path(&mut value, "base_seed", Value::from(s));
    }
    Ok(value)
}

/// Applies one `key=value` override. The value is parsed as JSON when
/// possible and kept as a string otherwise, so `--set method=svrg` and
/// `--set step_size=0.25` both do the expected thing.
fn apply_override(root: &mut Value, spec: &str) -> Result<(), Failure> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| {
        fail(EXIT_VALIDATION, format!("override '{spec}' must have the form key=value"))
    })?;
    if key.is_empty() {
        return Err(fail(EXIT_VALIDATION, format!("override '{spec}' has an empty key")));
    }
    let parsed = serde_json::from_str::<Value>(raw).unwrap_or(Value::String(raw.to_string()));
    if !set_path(root, key, parsed) {
        return Err(fail(
            EXIT_VALIDATION,
            format!("cannot set '{key}': a path segment is not an object"),
        ));
    }
    Ok(())
}

/// Writes `value` at the dotted `key` path, creating objects along the way.
/// Returns false when an intermediate segment exists but is not an object.
fn set_path(root: &mut Value, key: &str, value: Value) -> bool {
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = root;
    for part in &parts[..parts.len() - 1] {
        let Some(map) = cur.as_object_mut() else { return false };
        cur = map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    match cur.as_object_mut() {
        Some(map) => {
            map.insert(parts[parts.len() - 1].to_string(), value);
            true
        }
        None => false,
    }
}

fn parse_config<T: serde::de::DeserializeOwned>(value: Value) -> Result<T, Failure> {
    serde_json::from_value(value)
        .map_err(|e| fail(EXIT_VALIDATION, format!("invalid configuration: {e}")))
}

fn validation_failure(errors: Vec<String>) -> Failure {
    fail(
        EXIT_VALIDATION,
        format!("invalid configuration:\n  - {}", errors.join("\n  - ")),
    )
}

fn map_harness_error(e: HarnessError) -> Failure {
    let code = match &e {
        HarnessError::Config(_) | HarnessError::Model(_) | HarnessError::Bound(_) => {
            EXIT_VALIDATION
        }
        HarnessError::Replicate { source, .. } => match source {
            OptimError::DivergedInner { .. } | OptimError::DivergedStep { .. } => EXIT_DIVERGENCE,
            _ => EXIT_VALIDATION,
        },
        HarnessError::Data(_)
        | HarnessError::ParseFile { .. }
        | HarnessError::Io { .. }
        | HarnessError::Oracle { .. }
        | HarnessError::ThreadPool(_) => EXIT_RUNTIME,
    };
    fail(code, e.to_string())
}

fn print_manifest(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

// ---------------------------------------------------------------------------
// Experiment subcommands
// ---------------------------------------------------------------------------

fn run_stability_cmd(cli: &Cli) -> Result<(), Failure> {
    let value = load_config_value(cli, "replicates")?;
    let cfg: StabilityConfig = parse_config(value)?;
    let errors = cfg.validation_errors();
    if !errors.is_empty() {
        return Err(validation_failure(errors));
    }
    let report = run_coupled_stability(&cfg, cli.workers).map_err(map_harness_error)?;
    if let Some(note) = &report.bound_note {
        eprintln!("warning: {note}");
    }
    let manifest = emit_stability(&report, &cli.out, "stability").map_err(map_harness_error)?;
    print_manifest(&manifest);
    Ok(())
}

fn run_convergence_cmd(cli: &Cli) -> Result<(), Failure> {
    let value = load_config_value(cli, "replicates")?;
    let cfg: ConvergenceConfig = parse_config(value)?;
    let errors = cfg.validation_errors();
    if !errors.is_empty() {
        return Err(validation_failure(errors));
    }
    let report = run_convergence(&cfg, cli.workers).map_err(map_harness_error)?;
    if let Some(note) = &report.bound_note {
        eprintln!("warning: {note}");
    }
    let manifest =
        emit_convergence(&report, &cli.out, "convergence").map_err(map_harness_error)?;
    print_manifest(&manifest);
    Ok(())
}

fn run_epr_cmd(cli: &Cli) -> Result<(), Failure> {
    let value = load_config_value(cli, "pairs_per_n")?;
    let cfg: EprConfig = parse_config(value)?;
    let errors = cfg.validation_errors();
    if !errors.is_empty() {
        return Err(validation_failure(errors));
    }
    let report = run_epr_sweep(&cfg, cli.workers).map_err(map_harness_error)?;
    let manifest = emit_epr(&report, &cli.out, "epr").map_err(map_harness_error)?;
    print_manifest(&manifest);
    Ok(())
}

// ---------------------------------------------------------------------------
// Utility subcommands
// ---------------------------------------------------------------------------

fn read_dataset(path: &Path) -> Result<vrstab::data::Dataset, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| fail(EXIT_RUNTIME, format!("cannot read {}: {e}", path.display())))?;
    parse_libsvm(&text)
        .map_err(|e| fail(EXIT_VALIDATION, format!("{}: {e}", path.display())))
}

fn run_check_losses(args: &CheckLossesArgs) -> Result<(), Failure> {
    let data = read_dataset(&args.data)?;
    let kinds: Vec<LossKind> = match args.loss {
        LossArg::All => vec![
            LossKind::Logistic,
            LossKind::LeastSquares,
            LossKind::SmoothedHinge,
            LossKind::Huber,
        ],
        LossArg::Logistic => vec![LossKind::Logistic],
        LossArg::LeastSquares => vec![LossKind::LeastSquares],
        LossArg::SmoothedHinge => vec![LossKind::SmoothedHinge],
        LossArg::Huber => vec![LossKind::Huber],
    };
    let mut all_hold = true;
    for kind in kinds {
        let model = LossModel::certified_with_width(kind, &data, args.l2, args.width)
            .map_err(|e| fail(EXIT_VALIDATION, e.to_string()))?;
        let sb = check_self_bounding(&model, &data, args.pairs, args.check_seed);
        let co = check_coercivity(&model, &data, args.pairs, args.check_seed);
        let cv = check_convexity_lower_bound(&model, &data, args.pairs, args.check_seed);
        all_hold &= sb.holds() && co.holds() && cv.holds();
        let verdict = |r: &vrstab::losses::InequalityReport| {
            format!(
                "{}(max_violation={:e})",
                if r.holds() { "PASS" } else { "FAIL" },
                r.max_violation
            )
        };
        println!(
            "loss={:?} alpha={} mu={} self_bounding={} coercivity={} convexity={}",
            kind,
            model.alpha(),
            model.mu(),
            verdict(&sb),
            verdict(&co),
            verdict(&cv),
        );
    }
    if all_hold {
        Ok(())
    } else {
        Err(fail(EXIT_VALIDATION, "one or more loss inequalities failed"))
    }
}

fn run_parse_data(path: &Path) -> Result<(), Failure> {
    let data = read_dataset(path)?;
    let nonzeros: usize = data.samples().iter().map(|s| s.indices().len()).sum();
    println!(
        "examples={} dimension={} nonzeros={}",
        data.len(),
        data.dimension(),
        nonzeros
    );
    Ok(())
}

fn run_select_params(args: &SelectParamsArgs) -> Result<(), Failure> {
    let params = select_params(
        args.regime.into(),
        args.method.into(),
        args.n,
        args.initial_risk,
        args.alpha,
        args.mu,
    )
    .map_err(|e| fail(EXIT_VALIDATION, e.to_string()))?;
    println!("method={}", params.method);
    println!("regime={:?}", params.regime);
    println!("step_size={}", params.step_size);
    println!("inner_length={}", params.inner_length);
    println!("rounds={}", params.rounds);
    println!("gamma={}", params.gamma);
    if let Some(c) = params.c {
        println!("c={c}");
    }
    if let Some(rho) = params.rho {
        println!("rho={rho}");
    }
    Ok(())
}
