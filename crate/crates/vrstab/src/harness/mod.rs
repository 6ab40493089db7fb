//! The experiment harness: coupled stability runs, convergence runs against
//! a full-gradient-descent oracle, excess-population-risk sweeps, replicate
//! aggregation, bound-vs-measurement comparison, and deterministic CSV/SVG
//! emission.
//!
//! # Determinism contract
//!
//! Every report is a pure function of its configuration. Per-replicate seeds
//! come from a fixed 64-bit mixer ([`mix_seed`]), all random draws flow
//! through seeded ChaCha streams, replicates are aggregated in replicate-id
//! order with compensated summation, and the emitters render floats with
//! Rust's shortest-round-trip formatting. Worker counts affect wall-clock
//! time only, never bytes.
//!
//! # Coupled stability runs
//!
//! A stability replicate builds a neighboring dataset pair (S, S′) differing
//! in one example, then runs the configured method on both *sharing one
//! index stream* and the same start w₁ = 0, so the trajectories differ only
//! through the replaced example. The distance between the paired iterates is
//! recorded on a fixed checkpoint grid; the empirical risks logged along the
//! S-trajectory feed the closed-form stability certificates of [`crate::bounds`].

mod convergence;
mod epr;
mod output;

pub use convergence::{
    gd_oracle, run_convergence, ConvergenceConfig, ConvergencePooled, ConvergenceReport, GdOracle,
    OracleStall,
};
pub use epr::{
    fit_loglog_slope, population_minimum_regularized, population_risk_regularized, run_epr_sweep,
    EprConfig, EprReport,
};
pub use output::{
    convergence_csv, emit_convergence, emit_epr, emit_stability, epr_csv, stability_csv,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{
    saga_stability_convex, saga_stability_sc, svrg_stability_convex, svrg_stability_sc,
    BoundError, BoundInputs, Regime,
};
use crate::data::{
    make_neighbor, parse_libsvm, preprocess, scale_to_unit_norm, split_train, generate_synthetic,
    DataError, Dataset, NeighborPair, ParseError, SyntheticSpec,
};
use crate::losses::{
    certify_constants, empirical_risk, LossKind, LossModel, ModelError, Weights,
};
use crate::optim::{
    IndexStream, InitOption, Method, OptimError, SagaEngine, SgdEngine, SvrgEngine,
};
use crate::tol;

/// Why an experiment could not produce a report.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(#[from] DataError),
    #[error("failed to parse dataset file {path}: {source}")]
    ParseFile { path: String, source: ParseError },
    #[error("loss model rejected: {0}")]
    Model(#[from] ModelError),
    #[error("replicate {replicate} diverged: {source}")]
    Replicate { replicate: usize, source: OptimError },
    #[error("gradient-descent oracle stalled in replicate {replicate}: gradient norm {grad_norm:e} after {iterations} iterations")]
    Oracle { replicate: usize, iterations: usize, grad_norm: f64 },
    #[error("bound evaluation failed: {0}")]
    Bound(#[from] BoundError),
    #[error("worker pool could not be built: {0}")]
    ThreadPool(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

// ---------------------------------------------------------------------------
// Seeds and replicate scheduling
// ---------------------------------------------------------------------------

/// Derives a child seed from `(base, stream)` with the splitmix64 finalizer.
/// The mixer is fixed forever: changing it would silently change every
/// experiment, so the constants below are part of the output contract.
pub fn mix_seed(base: u64, stream: u64) -> u64 {
    let mut z = base.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Purpose tags for the per-replicate sub-seeds (second `mix_seed` level).
const SALT_DATA: u64 = 1;
const SALT_SPLIT: u64 = 2;
const SALT_NEIGHBOR: u64 = 3;
const SALT_STREAM: u64 = 4;

/// Extra synthetic samples generated per replicate to serve as the
/// replacement pool for neighboring-dataset construction.
const SYNTHETIC_POOL: usize = 16;

/// Runs `count` independent jobs (ids `0..count`), optionally inside a
/// dedicated pool with `workers` threads, and returns the results in id
/// order. On failure, the error of the smallest failing id is returned, so
/// the error path is as deterministic as the success path.
fn run_parallel<T, F>(count: usize, workers: Option<usize>, job: F) -> Result<Vec<T>, HarnessError>
where
    T: Send,
    F: Fn(usize) -> Result<T, HarnessError> + Sync,
{
    let run = || (0..count).into_par_iter().map(|r| job(r)).collect::<Vec<_>>();
    let results = match workers {
        None => run(),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| HarnessError::ThreadPool(e.to_string()))?
            .install(run),
    };
    results.into_iter().collect()
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

/// Mean and sample standard deviation of one checkpoint's replicate values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateStats {
    pub mean: f64,
    /// Sample standard deviation (divisor R−1); 0 when undefined.
    pub std: f64,
    /// Number of replicate values aggregated.
    pub count: usize,
    /// False for a single replicate, where the sample std is undefined and
    /// reported as 0.
    pub std_defined: bool,
}

fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Aggregates replicate values in the order given (callers pass
/// replicate-id order) with compensated summation.
///
/// # Panics
/// If `values` is empty — aggregation of zero replicates is a contract
/// violation.
pub fn aggregate(values: &[f64]) -> AggregateStats {
    assert!(!values.is_empty(), "aggregate requires at least one replicate value");
    let n = values.len();
    let mean = kahan_sum(values.iter().copied()) / n as f64;
    if n == 1 {
        return AggregateStats { mean, std: 0.0, count: 1, std_defined: false };
    }
    let ss = kahan_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    AggregateStats {
        mean,
        std: (ss / (n - 1) as f64).sqrt(),
        count: n,
        std_defined: true,
    }
}

/// Per-checkpoint aggregation of replicate-major rows (`rows[r][c]` =
/// replicate r's value at checkpoint c). All rows must have equal length.
fn aggregate_columns(rows: &[Vec<f64>]) -> Vec<AggregateStats> {
    let cols = rows.first().map_or(0, Vec::len);
    (0..cols)
        .map(|c| {
            let column: Vec<f64> = rows.iter().map(|row| row[c]).collect();
            aggregate(&column)
        })
        .collect()
}

/// Columnwise mean of replicate-major rows (compensated, id order).
fn mean_columns(rows: &[Vec<f64>]) -> Vec<f64> {
    let cols = rows.first().map_or(0, Vec::len);
    (0..cols)
        .map(|c| kahan_sum(rows.iter().map(|row| row[c])) / rows.len() as f64)
        .collect()
}

// ---------------------------------------------------------------------------
// Checkpoints and traces
// ---------------------------------------------------------------------------

/// The checkpoint grid over `1..=total` outer positions: the origin plus up
/// to `points` evenly spaced step indices (always including `total`),
/// deduplicated and strictly increasing.
pub fn checkpoint_steps(total: usize, points: usize) -> Vec<usize> {
    assert!(total >= 1 && points >= 1, "checkpoint grid needs total ≥ 1 and points ≥ 1");
    let mut steps = vec![0usize];
    for i in 1..=points {
        let s = (i * total).div_ceil(points);
        if s > *steps.last().expect("nonempty") {
            steps.push(s);
        }
    }
    steps
}

/// One measured point of a coupled run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    /// Position in data passes: component-gradient steps so far divided by n.
    pub epoch: f64,
    /// ‖w − w′‖ between the coupled iterates.
    pub distance: f64,
    /// ‖w − w′‖², the quantity the theorems bound.
    pub sq_distance: f64,
}

/// A per-replicate coupled distance trace on the checkpoint grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTrace {
    pub points: Vec<TracePoint>,
}

impl DistanceTrace {
    /// Checks the structural invariants: epochs strictly increasing,
    /// distances nonnegative, and sq_distance = distance² within
    /// [`tol::SQUARE_BOOKKEEPING`] (relative to the squared value's scale).
    pub fn validate(&self) -> Result<(), String> {
        for (i, p) in self.points.iter().enumerate() {
            if i > 0 && p.epoch <= self.points[i - 1].epoch {
                return Err(format!("epoch not increasing at point {i}"));
            }
            if !(p.distance >= 0.0 && p.sq_distance >= 0.0) {
                return Err(format!("negative distance at point {i}"));
            }
            let err = (p.sq_distance - p.distance * p.distance).abs();
            if err > tol::SQUARE_BOOKKEEPING * p.sq_distance.max(1.0) {
                return Err(format!("sq_distance disagrees with distance² at point {i}"));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Where a replicate's data comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// A LIBSVM-format text file, loaded once and split per replicate; the
    /// held-out part doubles as the replacement pool for neighbor pairs.
    File {
        path: String,
        #[serde(default = "default_train_fraction")]
        train_fraction: f64,
    },
    /// A fresh draw from the Gaussian linear model per replicate:
    /// `train_n` training examples plus a small replacement pool.
    Synthetic {
        dimension: usize,
        target: Vec<f64>,
        noise_sigma: f64,
        train_n: usize,
    },
}

fn default_train_fraction() -> f64 {
    0.8
}

impl DataSource {
    fn push_errors(&self, errors: &mut Vec<String>) {
        match self {
            DataSource::File { path, train_fraction } => {
                if path.is_empty() {
                    errors.push("source.path must not be empty".into());
                }
                if !(*train_fraction > 0.0 && *train_fraction <= 1.0) {
                    errors.push(format!(
                        "source.train_fraction must lie in (0, 1] (got {train_fraction})"
                    ));
                }
            }
            DataSource::Synthetic { dimension, target, noise_sigma, train_n } => {
                if *dimension == 0 {
                    errors.push("source.dimension must be at least 1".into());
                }
                if target.len() != *dimension {
                    errors.push(format!(
                        "source.target has {} entries, expected {dimension}",
                        target.len()
                    ));
                }
                if !target.iter().all(|c| c.is_finite()) {
                    errors.push("source.target entries must be finite".into());
                }
                if !(noise_sigma.is_finite() && *noise_sigma >= 0.0) {
                    errors.push(format!("source.noise_sigma must be ≥ 0 (got {noise_sigma})"));
                }
                if *train_n < 2 {
                    errors.push("source.train_n must be at least 2".into());
                }
            }
        }
    }
}

/// Feature/label preparation applied to each realized dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preprocessing {
    /// Use the data as-is.
    None,
    /// Scale every feature vector to unit norm, keep labels.
    ScaleFeatures,
    /// Binarize labels around the median and scale features to unit norm.
    Classification,
}

impl Preprocessing {
    fn apply(self, data: &Dataset) -> Result<Dataset, DataError> {
        match self {
            Preprocessing::None => Ok(data.clone()),
            Preprocessing::ScaleFeatures => Ok(scale_to_unit_norm(data)),
            Preprocessing::Classification => preprocess(data),
        }
    }
}

fn default_preprocessing() -> Preprocessing {
    Preprocessing::Classification
}

fn default_loss() -> LossKind {
    LossKind::Logistic
}

fn default_replicates() -> usize {
    100
}

fn default_epochs() -> usize {
    8
}

fn default_checkpoints() -> usize {
    50
}

fn default_init_option() -> InitOption {
    InitOption::LastIterate
}

fn default_regime() -> Regime {
    Regime::Convex
}

/// Configuration of a coupled stability experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub method: Method,
    #[serde(default = "default_loss")]
    pub loss: LossKind,
    #[serde(default)]
    pub l2: f64,
    pub source: DataSource,
    #[serde(default = "default_preprocessing")]
    pub preprocessing: Preprocessing,
    pub step_size: f64,
    /// Two-loop inner length m; `None` means m = n (one data pass per round).
    #[serde(default)]
    pub inner_length: Option<usize>,
    /// Run length in data passes: the two-loop method executes
    /// ⌈epochs·n/m⌉ rounds, the single-loop methods epochs·n steps.
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_init_option")]
    pub init_option: InitOption,
    /// Which stability certificate to evaluate alongside the measurements.
    #[serde(default = "default_regime")]
    pub regime: Regime,
    /// Number of evenly spaced checkpoints (the origin is always added).
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
}

impl StabilityConfig {
    /// All validation failures, itemized (empty = valid).
    pub fn validation_errors(&self) -> Vec<String> {
        let mut errors = Vec::new();
        self.source.push_errors(&mut errors);
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            errors.push(format!("step_size must be positive (got {})", self.step_size));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            errors.push(format!("l2 must be ≥ 0 (got {})", self.l2));
        }
        if self.inner_length == Some(0) {
            errors.push("inner_length must be at least 1".into());
        }
        if self.epochs == 0 {
            errors.push("epochs must be at least 1".into());
        }
        if self.replicates == 0 {
            errors.push("replicates must be at least 1".into());
        }
        if self.checkpoints == 0 {
            errors.push("checkpoints must be at least 1".into());
        }
        if let DataSource::File { train_fraction, .. } = &self.source {
            if *train_fraction >= 1.0 {
                errors.push(
                    "stability experiments on file sources need train_fraction < 1 \
                     (the holdout is the replacement pool)"
                        .into(),
                );
            }
        }
        errors
    }
}

fn config_error(errors: Vec<String>) -> HarnessError {
    HarnessError::Config(errors.join("; "))
}

// ---------------------------------------------------------------------------
// Data realization
// ---------------------------------------------------------------------------

/// A file source loaded and preprocessed once per experiment.
enum SourceBase {
    File(Dataset, f64),
    Synthetic { spec_dimension: usize, target: Vec<f64>, noise_sigma: f64, train_n: usize },
}

fn load_source(
    source: &DataSource,
    preprocessing: Preprocessing,
) -> Result<SourceBase, HarnessError> {
    match source {
        DataSource::File { path, train_fraction } => {
            let text = std::fs::read_to_string(path)
                .map_err(|source| HarnessError::Io { path: path.clone(), source })?;
            let raw = parse_libsvm(&text)
                .map_err(|source| HarnessError::ParseFile { path: path.clone(), source })?;
            Ok(SourceBase::File(preprocessing.apply(&raw)?, *train_fraction))
        }
        DataSource::Synthetic { dimension, target, noise_sigma, train_n } => {
            Ok(SourceBase::Synthetic {
                spec_dimension: *dimension,
                target: target.clone(),
                noise_sigma: *noise_sigma,
                train_n: *train_n,
            })
        }
    }
}

impl SourceBase {
    /// Materializes one replicate's training set and replacement pool.
    /// File sources shuffle-split the shared base; synthetic sources draw a
    /// fresh batch of `train_n + SYNTHETIC_POOL` examples (preprocessed
    /// jointly, keeping train and pool exchangeable).
    fn realize(
        &self,
        seed_r: u64,
        preprocessing: Preprocessing,
    ) -> Result<(Dataset, Dataset), HarnessError> {
        match self {
            SourceBase::File(base, fraction) => {
                Ok(split_train(base, *fraction, mix_seed(seed_r, SALT_SPLIT))?)
            }
            SourceBase::Synthetic { spec_dimension, target, noise_sigma, train_n } => {
                let spec = SyntheticSpec::new(
                    *spec_dimension,
                    Weights(target.clone()),
                    *noise_sigma,
                    mix_seed(seed_r, SALT_DATA),
                )?;
                let batch = generate_synthetic(&spec, train_n + SYNTHETIC_POOL);
                let batch = preprocessing.apply(&batch)?;
                let samples = batch.samples();
                let train = Dataset::new(samples[..*train_n].to_vec())?;
                let pool = Dataset::new(samples[*train_n..].to_vec())?;
                Ok((train, pool))
            }
        }
    }

    /// The training-set size every replicate will see.
    fn train_len(&self) -> usize {
        match self {
            SourceBase::File(base, fraction) => (fraction * base.len() as f64).floor() as usize,
            SourceBase::Synthetic { train_n, .. } => *train_n,
        }
    }
}

// ---------------------------------------------------------------------------
// Coupled runs
// ---------------------------------------------------------------------------

/// Everything one stability replicate produces.
#[derive(Debug, Clone)]
pub struct ReplicateStability {
    /// Coupled distances on the checkpoint grid.
    pub trace: DistanceTrace,
    /// L_S(w₁) on the original dataset.
    pub initial_risk: f64,
    /// Two-loop: per executed round, the sum of the m pre-update
    /// inner-iterate risks on the original dataset (empty when the convex
    /// certificate is not being evaluated).
    pub round_risk_sums: Vec<f64>,
    /// Two-loop: risk of each selected reference on the original dataset.
    pub reference_risks: Vec<f64>,
    /// Single-loop: risk at each pre-update iterate on the original dataset.
    pub step_risks: Vec<f64>,
    /// Certified smoothness over both datasets of the pair.
    pub alpha: f64,
    /// Certified strong convexity (the ℓ2 coefficient).
    pub mu: f64,
}

/// What the per-checkpoint distance measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StabilityObservable {
    /// Paired inner iterates on a grid of component steps.
    Iterates,
    /// Paired round references on a grid of rounds (two-loop, strongly
    /// convex certificate).
    References,
}

fn trace_point(epoch: f64, a: &Weights, b: &Weights) -> TracePoint {
    let sq = a.dist_sq(b);
    TracePoint { epoch, distance: sq.sqrt(), sq_distance: sq }
}

/// Runs the two-loop method on both datasets of `pair` from w₁ = 0 with one
/// shared index stream, measuring coupled distances on `grid`.
///
/// `grid` holds global component-step indices when `observable` is
/// `Iterates`, or round indices when it is `References`. `record_inner`
/// additionally logs the per-round sums of pre-update inner-iterate risks on
/// the original dataset (the convex certificate's input).
#[allow(clippy::too_many_arguments)]
fn coupled_svrg(
    model: &LossModel,
    pair: &NeighborPair,
    step_size: f64,
    inner_length: usize,
    rounds: usize,
    init_option: InitOption,
    grid: &[usize],
    observable: StabilityObservable,
    record_inner: bool,
    stream: &mut IndexStream,
) -> Result<(DistanceTrace, f64, Vec<f64>, Vec<f64>), OptimError> {
    let n = pair.original.len();
    let dim = pair.original.dimension().max(pair.perturbed.dimension());
    let init = Weights::zeros(dim);
    let mut a = SvrgEngine::new(model, &pair.original, step_size, init.clone())?;
    let mut b = SvrgEngine::new(model, &pair.perturbed, step_size, init)?;

    let initial_risk = empirical_risk(model, a.iterate(), &pair.original);
    let mut reference_risks = vec![initial_risk];
    let mut round_sums = Vec::new();
    let mut points = Vec::new();
    let mut grid_iter = grid.iter().copied().peekable();
    if grid_iter.peek() == Some(&0) {
        grid_iter.next();
        points.push(trace_point(0.0, a.iterate(), b.iterate()));
    }

    let m = inner_length;
    let mut index_buf = Vec::with_capacity(m);
    for round in 1..=rounds {
        index_buf.clear();
        for _ in 0..m {
            index_buf.push(stream.next_index(n));
        }
        let selection = stream.next_index(m);
        a.begin_round(m, selection);
        b.begin_round(m, selection);
        let mut round_sum = 0.0;
        let mut round_comp = 0.0;
        for (k, &i) in index_buf.iter().enumerate() {
            if record_inner {
                // Compensated in-order accumulation of the m risk terms.
                let y = empirical_risk(model, a.iterate(), &pair.original) - round_comp;
                let t = round_sum + y;
                round_comp = (t - round_sum) - y;
                round_sum = t;
            }
            a.inner_step(i)?;
            b.inner_step(i)?;
            if observable == StabilityObservable::Iterates {
                let global = (round - 1) * m + k + 1;
                if grid_iter.peek() == Some(&global) {
                    grid_iter.next();
                    points.push(trace_point(global as f64 / n as f64, a.iterate(), b.iterate()));
                }
            }
        }
        a.end_round(init_option);
        b.end_round(init_option);
        if record_inner {
            round_sums.push(round_sum);
        }
        reference_risks.push(empirical_risk(model, a.reference(), &pair.original));
        if observable == StabilityObservable::References && grid_iter.peek() == Some(&round) {
            grid_iter.next();
            points.push(trace_point(
                (round * m) as f64 / n as f64,
                a.reference(),
                b.reference(),
            ));
        }
    }
    Ok((DistanceTrace { points }, initial_risk, round_sums, reference_risks))
}

/// Runs a single-loop method (table-based or plain stochastic) on both
/// datasets of `pair` with one shared stream, measuring coupled distances at
/// the step indices in `grid` and optionally logging pre-update risks on the
/// original dataset.
fn coupled_single_loop(
    method: Method,
    model: &LossModel,
    pair: &NeighborPair,
    step_size: f64,
    total_steps: usize,
    grid: &[usize],
    record_risks: bool,
    stream: &mut IndexStream,
) -> Result<(DistanceTrace, f64, Vec<f64>), OptimError> {
    let n = pair.original.len();
    let dim = pair.original.dimension().max(pair.perturbed.dimension());
    let init = Weights::zeros(dim);
    let (mut a, mut b): (Box<dyn crate::optim::SingleLoopEngine>, Box<dyn crate::optim::SingleLoopEngine>) =
        match method {
            Method::Saga => (
                Box::new(SagaEngine::new(model, &pair.original, step_size, init.clone())?),
                Box::new(SagaEngine::new(model, &pair.perturbed, step_size, init)?),
            ),
            Method::Sgd => (
                Box::new(SgdEngine::new(model, &pair.original, step_size, init.clone())?),
                Box::new(SgdEngine::new(model, &pair.perturbed, step_size, init)?),
            ),
            Method::Svrg => unreachable!("two-loop method uses coupled_svrg"),
        };

    let initial_risk = empirical_risk(model, a.iterate(), &pair.original);
    let mut step_risks = Vec::new();
    let mut points = Vec::new();
    let mut grid_iter = grid.iter().copied().peekable();
    if grid_iter.peek() == Some(&0) {
        grid_iter.next();
        points.push(trace_point(0.0, a.iterate(), b.iterate()));
    }
    for step in 1..=total_steps {
        if record_risks {
            step_risks.push(empirical_risk(model, a.iterate(), &pair.original));
        }
        let i = stream.next_index(n);
        a.step(i)?;
        b.step(i)?;
        if grid_iter.peek() == Some(&step) {
            grid_iter.next();
            points.push(trace_point(step as f64 / n as f64, a.iterate(), b.iterate()));
        }
    }
    Ok((DistanceTrace { points }, initial_risk, step_risks))
}

// ---------------------------------------------------------------------------
// The stability experiment
// ---------------------------------------------------------------------------

/// Replicate-mean bound inputs (the theorems bound expectations, so the
/// certificate curve is evaluated once on pooled means — one curve, not one
/// per replicate).
#[derive(Debug, Clone, PartialEq)]
pub struct PooledRisks {
    /// Mean L_S(w₁) over replicates (the L(w₁) estimate).
    pub initial_risk: f64,
    /// Two-loop: mean per-round inner-risk sums.
    pub round_risk_sums: Vec<f64>,
    /// Two-loop: mean reference risks (entry 0 = L_S(w₁)).
    pub reference_risks: Vec<f64>,
    /// Single-loop: mean pre-update risks per step.
    pub step_risks: Vec<f64>,
}

/// Everything a stability experiment produces.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub method: Method,
    pub regime: Regime,
    /// Training-set size n.
    pub n: usize,
    /// Two-loop inner length m (1 for single-loop methods).
    pub inner_length: usize,
    /// Outer units executed: rounds (two-loop) or steps (single-loop).
    pub outer_units: usize,
    pub step_size: f64,
    /// Pooled certified smoothness (max over replicates and both datasets).
    pub alpha: f64,
    /// Pooled certified strong convexity (min over replicates).
    pub mu: f64,
    /// Checkpoint grid: component steps (or rounds for the two-loop
    /// strongly convex certificate, which tracks reference distances).
    pub steps: Vec<usize>,
    /// The same grid in data-pass units.
    pub epochs_axis: Vec<f64>,
    /// Per-replicate traces, replicate-id order.
    pub traces: Vec<DistanceTrace>,
    /// Per-checkpoint stats of the coupled distance.
    pub distance_stats: Vec<AggregateStats>,
    /// Per-checkpoint stats of the squared coupled distance.
    pub sq_stats: Vec<AggregateStats>,
    /// The certificate curve on the same grid (squared-distance units), or
    /// `None` with a note when the regime conditions exclude it.
    pub bound_sq: Option<Vec<f64>>,
    pub bound_note: Option<String>,
    /// Replicate-mean certificate inputs.
    pub pooled: PooledRisks,
    /// Raw per-replicate risk logs (for re-deriving `pooled`).
    pub replicate_risks: Vec<ReplicateStability>,
}

/// Runs the coupled stability experiment described by `cfg`.
///
/// Replicates run concurrently (optionally on a dedicated pool of `workers`
/// threads); the report is byte-identical for every worker count. Any
/// replicate failure (divergence, bad data) fails the whole experiment with
/// that replicate's diagnostics.
pub fn run_coupled_stability(
    cfg: &StabilityConfig,
    workers: Option<usize>,
) -> Result<StabilityReport, HarnessError> {
    let errors = cfg.validation_errors();
    if !errors.is_empty() {
        return Err(config_error(errors));
    }
    let base = load_source(&cfg.source, cfg.preprocessing)?;
    let n = base.train_len();
    if n < 2 {
        return Err(HarnessError::Config(format!(
            "training set has {n} examples; need at least 2"
        )));
    }
    let m = cfg.inner_length.unwrap_or(n);
    let (outer_units, grid, observable) = match (cfg.method, cfg.regime) {
        (Method::Svrg, Regime::StronglyConvex) => {
            let rounds = (cfg.epochs * n).div_ceil(m);
            (rounds, checkpoint_steps(rounds, cfg.checkpoints), StabilityObservable::References)
        }
        (Method::Svrg, Regime::Convex) => {
            let rounds = (cfg.epochs * n).div_ceil(m);
            let total = rounds * m;
            (rounds, checkpoint_steps(total, cfg.checkpoints), StabilityObservable::Iterates)
        }
        (_, _) => {
            let total = cfg.epochs * n;
            (total, checkpoint_steps(total, cfg.checkpoints), StabilityObservable::Iterates)
        }
    };
    // Risk logging is enabled exactly where a certificate consumes it.
    let record_inner = cfg.method == Method::Svrg && cfg.regime == Regime::Convex;
    let record_steps = cfg.method == Method::Saga;

    let outcomes: Vec<ReplicateStability> = run_parallel(cfg.replicates, workers, |r| {
        let seed_r = mix_seed(cfg.base_seed, r as u64);
        let (train, pool) = base.realize(seed_r, cfg.preprocessing)?;
        let pair = make_neighbor(&train, &pool, mix_seed(seed_r, SALT_NEIGHBOR))?;
        let model = LossModel::certified(cfg.loss, &pair.original, cfg.l2)?;
        let (alpha_b, mu_b) = certify_constants(cfg.loss, &pair.perturbed, cfg.l2, model.width());
        let alpha = model.alpha().max(alpha_b);
        let mu = model.mu().min(mu_b);
        let mut stream = IndexStream::new(mix_seed(seed_r, SALT_STREAM));
        let wrap = |source| HarnessError::Replicate { replicate: r, source };
        match cfg.method {
            Method::Svrg => {
                let (trace, initial_risk, round_risk_sums, reference_risks) = coupled_svrg(
                    &model,
                    &pair,
                    cfg.step_size,
                    m,
                    outer_units,
                    cfg.init_option,
                    &grid,
                    observable,
                    record_inner,
                    &mut stream,
                )
                .map_err(wrap)?;
                Ok(ReplicateStability {
                    trace,
                    initial_risk,
                    round_risk_sums,
                    reference_risks,
                    step_risks: Vec::new(),
                    alpha,
                    mu,
                })
            }
            method => {
                let (trace, initial_risk, step_risks) = coupled_single_loop(
                    method,
                    &model,
                    &pair,
                    cfg.step_size,
                    outer_units,
                    &grid,
                    record_steps,
                    &mut stream,
                )
                .map_err(wrap)?;
                Ok(ReplicateStability {
                    trace,
                    initial_risk,
                    round_risk_sums: Vec::new(),
                    reference_risks: Vec::new(),
                    step_risks,
                    alpha,
                    mu,
                })
            }
        }
    })?;

    let distance_rows: Vec<Vec<f64>> =
        outcomes.iter().map(|o| o.trace.points.iter().map(|p| p.distance).collect()).collect();
    let sq_rows: Vec<Vec<f64>> =
        outcomes.iter().map(|o| o.trace.points.iter().map(|p| p.sq_distance).collect()).collect();
    let pooled = PooledRisks {
        initial_risk: kahan_sum(outcomes.iter().map(|o| o.initial_risk)) / outcomes.len() as f64,
        round_risk_sums: mean_columns(
            &outcomes.iter().map(|o| o.round_risk_sums.clone()).collect::<Vec<_>>(),
        ),
        reference_risks: mean_columns(
            &outcomes.iter().map(|o| o.reference_risks.clone()).collect::<Vec<_>>(),
        ),
        step_risks: mean_columns(
            &outcomes.iter().map(|o| o.step_risks.clone()).collect::<Vec<_>>(),
        ),
    };
    let alpha = outcomes.iter().map(|o| o.alpha).fold(f64::NEG_INFINITY, f64::max);
    let mu = outcomes.iter().map(|o| o.mu).fold(f64::INFINITY, f64::min);

    let (bound_sq, bound_note) = match stability_bound_curve(
        cfg.method, cfg.regime, alpha, mu, cfg.step_size, m, n, &grid, &pooled,
    ) {
        Ok(Some(curve)) => (Some(curve), None),
        Ok(None) => (None, Some(format!("no stability certificate for {}", cfg.method))),
        Err(e) => (None, Some(format!("certificate disabled: {e}"))),
    };

    let epochs_axis = outcomes[0].trace.points.iter().map(|p| p.epoch).collect();
    Ok(StabilityReport {
        method: cfg.method,
        regime: cfg.regime,
        n,
        inner_length: if cfg.method == Method::Svrg { m } else { 1 },
        outer_units,
        step_size: cfg.step_size,
        alpha,
        mu,
        steps: grid,
        epochs_axis,
        traces: outcomes.iter().map(|o| o.trace.clone()).collect(),
        distance_stats: aggregate_columns(&distance_rows),
        sq_stats: aggregate_columns(&sq_rows),
        bound_sq,
        bound_note,
        pooled,
        replicate_risks: outcomes,
    })
}

/// Evaluates the matching stability certificate at every grid point, from
/// pooled risk inputs. Returns `Ok(None)` when the method has no
/// certificate (plain stochastic baseline).
#[allow(clippy::too_many_arguments)]
fn stability_bound_curve(
    method: Method,
    regime: Regime,
    alpha: f64,
    mu: f64,
    step_size: f64,
    m: usize,
    n: usize,
    grid: &[usize],
    pooled: &PooledRisks,
) -> Result<Option<Vec<f64>>, BoundError> {
    let mut curve = Vec::with_capacity(grid.len());
    for &g in grid {
        if g == 0 {
            curve.push(0.0);
            continue;
        }
        let value = match (method, regime) {
            (Method::Svrg, Regime::Convex) => {
                // A checkpoint inside round q is covered by the round-q
                // bound (the certificate is monotone over the round).
                let q = g.div_ceil(m);
                let p = BoundInputs { alpha, mu, step_size, inner_length: m, n, rounds: q };
                svrg_stability_convex(&p, &pooled.round_risk_sums[..q], pooled.initial_risk)?
            }
            (Method::Svrg, Regime::StronglyConvex) => {
                let p = BoundInputs { alpha, mu, step_size, inner_length: m, n, rounds: g };
                svrg_stability_sc(&p, &pooled.reference_risks[1..=g], pooled.initial_risk)?
            }
            (Method::Saga, Regime::Convex) => {
                let p = BoundInputs { alpha, mu, step_size, inner_length: 1, n, rounds: g };
                saga_stability_convex(&p, &pooled.step_risks[..g], pooled.initial_risk)?
            }
            (Method::Saga, Regime::StronglyConvex) => {
                let p = BoundInputs { alpha, mu, step_size, inner_length: 1, n, rounds: g };
                saga_stability_sc(&p, &pooled.step_risks[..g], pooled.initial_risk)?
            }
            (Method::Sgd, _) => return Ok(None),
        };
        curve.push(value);
    }
    Ok(Some(curve))
}

// ---------------------------------------------------------------------------
// Bound comparison
// ---------------------------------------------------------------------------

/// Per-checkpoint margins of a certificate over a measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundComparison {
    /// bound − measured, per checkpoint.
    pub margins: Vec<f64>,
    /// Fraction of checkpoints with margin ≥ 0.
    pub fraction_dominating: f64,
    /// The smallest margin (may be negative).
    pub min_margin: f64,
}

/// Compares a measured mean-squared-distance curve against a certificate
/// curve on the same checkpoint grid.
///
/// # Panics
/// If the two curves have different lengths or are empty — aligned grids
/// are the caller's contract.
pub fn compare_bound(mean_sq_distances: &[f64], bound_values: &[f64]) -> BoundComparison {
    assert_eq!(
        mean_sq_distances.len(),
        bound_values.len(),
        "bound comparison requires aligned checkpoint grids"
    );
    assert!(!mean_sq_distances.is_empty(), "bound comparison requires at least one checkpoint");
    let margins: Vec<f64> =
        bound_values.iter().zip(mean_sq_distances).map(|(b, d)| b - d).collect();
    let dominating = margins.iter().filter(|&&x| x >= 0.0).count();
    BoundComparison {
        fraction_dominating: dominating as f64 / margins.len() as f64,
        min_margin: margins.iter().copied().fold(f64::INFINITY, f64::min),
        margins,
    }
}
