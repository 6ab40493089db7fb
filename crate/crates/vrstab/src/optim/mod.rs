//! Stochastic optimizers with shared index streams.
//!
//! Three methods over the same empirical risk L_S(w) = (1/n)·Σ ℓ(w; z_i):
//!
//! - [`svrg_run`]: two-loop variance reduction. Each outer round fixes a
//!   reference point, computes its full gradient, runs `m` inner steps with
//!   the control-variate direction ∇ℓ(x;z_i) − ∇ℓ(ref;z_i) + ∇L_S(ref), and
//!   selects the next reference uniformly among the inner iterates.
//! - [`saga_run`]: single-loop variance reduction with a per-example
//!   gradient table; each step costs one fresh component gradient and O(d)
//!   bookkeeping.
//! - [`sgd_run`]: plain stochastic gradient descent (the baseline the
//!   variance-reduced methods are compared against).
//!
//! # Coupled runs and the index stream
//!
//! All index randomness flows through an explicit [`IndexStream`]. Running
//! the same method on two *neighboring* datasets while feeding both from a
//! single stream produces the coupled trajectories whose distance defines
//! algorithmic stability. The drivers therefore never create randomness
//! internally; they draw from the caller's stream in a pinned order — for
//! each outer round, `m` inner-index draws followed by one reference
//! selection draw.
//!
//! The lower-level engines ([`SvrgEngine`], [`SagaEngine`], [`SgdEngine`])
//! expose one-step-at-a-time control for the coupling harness: the caller
//! draws indices once and feeds the identical values to both engines,
//! observing the iterates after every step.
//!
//! # Determinism
//!
//! Given the same model, data, configuration, and stream seed, every run
//! reproduces bit-identical trajectories on every platform: index draws are
//! counter-based ChaCha, and all floating-point reductions have a fixed
//! association order.

mod saga;
mod sgd;
mod svrg;

pub use saga::SagaEngine;
pub use sgd::SgdEngine;
pub use svrg::SvrgEngine;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::Dataset;
use crate::losses::{empirical_risk, LossModel, Weights};

/// Errors from optimizer construction or execution.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum OptimError {
    #[error("step size must be positive and finite")]
    BadStepSize,
    #[error("inner loop length must be at least 1")]
    ZeroInnerLength,
    #[error("cannot optimize over an empty dataset")]
    EmptyDataset,
    #[error("iterate diverged (non-finite) at outer round {round}, inner step {step}")]
    DivergedInner { round: usize, step: usize },
    #[error("iterate diverged (non-finite) at step {step}")]
    DivergedStep { step: usize },
}

/// The optimization method an experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Svrg,
    Saga,
    Sgd,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Svrg => "svrg",
            Method::Saga => "saga",
            Method::Sgd => "sgd",
        })
    }
}

/// How a two-loop round initializes its inner iterate after selecting the
/// new reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitOption {
    /// Continue from the last inner iterate of the previous round.
    LastIterate,
    /// Restart at the newly selected reference point.
    Reference,
}

/// Configuration for [`svrg_run`].
#[derive(Debug, Clone, PartialEq)]
pub struct SvrgConfig {
    /// Constant step size η > 0.
    pub step_size: f64,
    /// Inner loop length m ≥ 1.
    pub inner_length: usize,
    /// Inner-iterate initialization rule.
    pub init_option: InitOption,
    /// Number of outer rounds to execute.
    pub outer_rounds: usize,
    /// Seed for [`IndexStream::new`] when the caller does not share one.
    pub seed: u64,
    /// Record the empirical risk at every pre-update inner iterate
    /// (one full risk evaluation per inner step — costly, off by default).
    pub record_inner_risks: bool,
}

/// Configuration for [`saga_run`] and [`sgd_run`].
#[derive(Debug, Clone, PartialEq)]
pub struct SagaConfig {
    /// Constant step size η > 0.
    pub step_size: f64,
    /// Number of single-example steps to execute.
    pub total_iters: usize,
    /// Seed for [`IndexStream::new`] when the caller does not share one.
    pub seed: u64,
    /// Record the empirical risk at every pre-update iterate
    /// (one full risk evaluation per step — costly, off by default).
    pub record_risks: bool,
}

/// A seeded, counted stream of uniform indices.
///
/// One stream can drive two coupled runs: the caller draws each value once
/// and feeds it to both. Draws are 1-based uniform over `1..=n` from a
/// ChaCha8 generator, identical on every platform for a given seed and
/// draw sequence.
#[derive(Debug, Clone)]
pub struct IndexStream {
    seed: u64,
    rng: ChaCha8Rng,
    draws: u64,
}

impl IndexStream {
    pub fn new(seed: u64) -> Self {
        IndexStream { seed, rng: ChaCha8Rng::seed_from_u64(seed), draws: 0 }
    }

    /// Next 1-based uniform index in `1..=n`.
    ///
    /// # Panics
    /// If `n == 0`.
    pub fn next_index(&mut self, n: usize) -> usize {
        assert!(n > 0, "cannot draw from an empty range");
        self.draws += 1;
        self.rng.gen_range(1..=n)
    }

    /// The seed this stream was created with.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of values drawn so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }
}

/// Everything recorded along one optimizer run.
///
/// Iterate indexing follows the convention w_1 = initial point, w_{k+1} =
/// the point after outer unit k (a full round for the two-loop method, a
/// single step otherwise).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// w_1, the starting point (always the origin for the run drivers).
    pub initial: Weights,
    /// The last inner iterate when the run stopped.
    pub final_iterate: Weights,
    /// Iterate after each outer unit: the selected reference per round
    /// (two-loop) or the post-step iterate (single-loop). Length = number
    /// of outer units executed.
    pub outer_iterates: Vec<Weights>,
    /// Running mean of all *pre-update* iterates, snapshot after each outer
    /// unit. Entry t is the average of the first m·t (two-loop) or t
    /// (single-loop) pre-update iterates.
    pub average_iterates: Vec<Weights>,
    /// Two-loop only: the 1-based position (within 1..=m) of the inner
    /// iterate selected as each round's new reference.
    pub reference_choices: Vec<usize>,
    /// Two-loop only: empirical risk of each reference, starting with the
    /// initial point — entry l is L_S(w_{l+1}).
    pub reference_risks: Option<Vec<f64>>,
    /// Single-loop methods with risk recording on: L_S at each pre-update
    /// iterate, entry k = L_S(w_{k+1}) for k = 0, …, total_iters − 1.
    pub step_risks: Option<Vec<f64>>,
    /// Two-loop with inner-risk recording on: per round, L_S at each of the
    /// m pre-update inner iterates.
    pub inner_risks: Option<Vec<Vec<f64>>>,
    /// Component-gradient evaluations consumed by the optimizer (a full
    /// gradient counts n; diagnostic risk evaluations are not included).
    pub gradient_evals: u64,
}

/// The final running mean of pre-update iterates, if any step ran.
pub fn average_iterate(traj: &Trajectory) -> Option<&Weights> {
    traj.average_iterates.last()
}

fn validate_step_size(step_size: f64) -> Result<(), OptimError> {
    if step_size.is_finite() && step_size > 0.0 {
        Ok(())
    } else {
        Err(OptimError::BadStepSize)
    }
}

/// Runs the two-loop variance-reduced method from the origin.
///
/// Per round: the full gradient at the current reference is computed, `m`
/// inner indices are drawn from `stream`, one selection position is drawn,
/// and the inner steps replay the drawn indices. The iterate at the selected
/// position becomes the next reference; the inner iterate then continues or
/// restarts per [`InitOption`].
///
/// Draw order per round (pinned for coupled reproducibility): m index
/// draws, then exactly one selection draw.
pub fn svrg_run(
    model: &LossModel,
    data: &Dataset,
    cfg: &SvrgConfig,
    stream: &mut IndexStream,
) -> Result<Trajectory, OptimError> {
    validate_step_size(cfg.step_size)?;
    if cfg.inner_length == 0 {
        return Err(OptimError::ZeroInnerLength);
    }
    if data.is_empty() {
        return Err(OptimError::EmptyDataset);
    }
    let n = data.len();
    let m = cfg.inner_length;
    let init = Weights::zeros(data.dimension());
    let mut engine = SvrgEngine::new(model, data, cfg.step_size, init.clone())?;

    let mut traj = Trajectory {
        initial: init,
        final_iterate: engine.iterate().clone(),
        outer_iterates: Vec::with_capacity(cfg.outer_rounds),
        average_iterates: Vec::with_capacity(cfg.outer_rounds),
        reference_choices: Vec::with_capacity(cfg.outer_rounds),
        reference_risks: Some(vec![empirical_risk(model, engine.reference(), data)]),
        step_risks: None,
        inner_risks: if cfg.record_inner_risks { Some(Vec::with_capacity(cfg.outer_rounds)) } else { None },
        gradient_evals: 0,
    };

    let mut index_buf = Vec::with_capacity(m);
    for _ in 0..cfg.outer_rounds {
        index_buf.clear();
        for _ in 0..m {
            index_buf.push(stream.next_index(n));
        }
        let selection = stream.next_index(m);
        engine.begin_round(m, selection);
        let mut round_risks = Vec::new();
        for &i in &index_buf {
            if cfg.record_inner_risks {
                round_risks.push(empirical_risk(model, engine.iterate(), data));
            }
            engine.inner_step(i)?;
        }
        engine.end_round(cfg.init_option);
        traj.outer_iterates.push(engine.reference().clone());
        traj.average_iterates.push(engine.average_iterate());
        traj.reference_choices.push(selection);
        if let Some(risks) = traj.reference_risks.as_mut() {
            risks.push(empirical_risk(model, engine.reference(), data));
        }
        if let Some(rounds) = traj.inner_risks.as_mut() {
            rounds.push(round_risks);
        }
    }
    traj.final_iterate = engine.iterate().clone();
    traj.gradient_evals = engine.gradient_evals();
    Ok(traj)
}

/// Runs the table-based variance-reduced method from the origin.
///
/// The gradient table is initialized with the per-example gradients at the
/// starting point (so the very first step is exactly a full-gradient step),
/// and each subsequent step draws one index from `stream`.
pub fn saga_run(
    model: &LossModel,
    data: &Dataset,
    cfg: &SagaConfig,
    stream: &mut IndexStream,
) -> Result<Trajectory, OptimError> {
    validate_step_size(cfg.step_size)?;
    if data.is_empty() {
        return Err(OptimError::EmptyDataset);
    }
    let init = Weights::zeros(data.dimension());
    let mut engine = SagaEngine::new(model, data, cfg.step_size, init.clone())?;
    run_single_loop(model, data, cfg, stream, init, &mut engine)
}

/// Runs plain stochastic gradient descent from the origin.
pub fn sgd_run(
    model: &LossModel,
    data: &Dataset,
    cfg: &SagaConfig,
    stream: &mut IndexStream,
) -> Result<Trajectory, OptimError> {
    validate_step_size(cfg.step_size)?;
    if data.is_empty() {
        return Err(OptimError::EmptyDataset);
    }
    let init = Weights::zeros(data.dimension());
    let mut engine = SgdEngine::new(model, data, cfg.step_size, init.clone())?;
    run_single_loop(model, data, cfg, stream, init, &mut engine)
}

/// The single-loop surface shared by the table-based and plain-stochastic
/// engines, so one driver serves both.
pub(crate) trait SingleLoopEngine {
    fn step(&mut self, index: usize) -> Result<(), OptimError>;
    fn iterate(&self) -> &Weights;
    fn average_iterate(&self) -> Weights;
    fn gradient_evals(&self) -> u64;
}

fn run_single_loop(
    model: &LossModel,
    data: &Dataset,
    cfg: &SagaConfig,
    stream: &mut IndexStream,
    init: Weights,
    engine: &mut dyn SingleLoopEngine,
) -> Result<Trajectory, OptimError> {
    let n = data.len();
    let mut traj = Trajectory {
        initial: init.clone(),
        final_iterate: init,
        outer_iterates: Vec::with_capacity(cfg.total_iters),
        average_iterates: Vec::with_capacity(cfg.total_iters),
        reference_choices: Vec::new(),
        reference_risks: None,
        step_risks: if cfg.record_risks { Some(Vec::with_capacity(cfg.total_iters)) } else { None },
        inner_risks: None,
        gradient_evals: 0,
    };
    for _ in 0..cfg.total_iters {
        if let Some(risks) = traj.step_risks.as_mut() {
            risks.push(empirical_risk(model, engine.iterate(), data));
        }
        let i = stream.next_index(n);
        engine.step(i)?;
        traj.outer_iterates.push(engine.iterate().clone());
        traj.average_iterates.push(engine.average_iterate());
    }
    traj.final_iterate = engine.iterate().clone();
    traj.gradient_evals = engine.gradient_evals();
    Ok(traj)
}
