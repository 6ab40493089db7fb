//! Convergence experiments: measured suboptimality along the optimizer run,
//! the per-replicate empirical minimum certified by a full-gradient-descent
//! oracle, and the matching closed-form convergence certificate evaluated on
//! pooled inputs.

use serde::{Deserialize, Serialize};

use super::{
    aggregate_columns, checkpoint_steps, config_error, kahan_sum, load_source, mix_seed,
    run_parallel, AggregateStats, DataSource, HarnessError, Preprocessing, SALT_STREAM,
};
use crate::bounds::{
    saga_suboptimality_convex, svrg_decay_ratio_sc, svrg_suboptimality_convex, BoundError,
    BoundInputs, Regime,
};
use crate::data::Dataset;
use crate::losses::{
    empirical_gradient_into, empirical_risk, LossKind, LossModel, Weights,
};
use crate::optim::{
    saga_run, sgd_run, svrg_run, IndexStream, InitOption, Method, SagaConfig, SvrgConfig,
    Trajectory,
};
use crate::tol;

/// Iteration cap for the full-gradient-descent oracle; hitting it without
/// reaching [`tol::ORACLE_GRAD_TOL`] is a hard error, not a silent fallback.
const ORACLE_MAX_ITERS: usize = 2_000_000;

/// A certified empirical minimizer: full gradient descent with step 1/α run
/// until the gradient norm is at most [`tol::ORACLE_GRAD_TOL`].
#[derive(Debug, Clone)]
pub struct GdOracle {
    pub minimizer: Weights,
    /// L_S at the minimizer — the baseline every suboptimality subtracts.
    pub risk: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

/// The oracle hit its iteration cap before reaching the gradient tolerance.
#[derive(Debug, Clone, Copy)]
pub struct OracleStall {
    pub iterations: usize,
    pub grad_norm: f64,
}

/// Runs full gradient descent from the origin with step 1/α until
/// ‖∇L_S‖ ≤ [`tol::ORACLE_GRAD_TOL`].
pub fn gd_oracle(model: &LossModel, data: &Dataset) -> Result<GdOracle, OracleStall> {
    let step = 1.0 / model.alpha();
    let mut w = Weights::zeros(data.dimension());
    let mut grad = Weights::zeros(data.dimension());
    let mut iterations = 0usize;
    loop {
        empirical_gradient_into(model, &w, data, &mut grad);
        let grad_norm = grad.norm_sq().sqrt();
        if grad_norm <= tol::ORACLE_GRAD_TOL {
            let risk = empirical_risk(model, &w, data);
            return Ok(GdOracle { minimizer: w, risk, iterations, grad_norm });
        }
        if iterations >= ORACLE_MAX_ITERS {
            return Err(OracleStall { iterations, grad_norm });
        }
        w.add_scaled(-step, &grad);
        iterations += 1;
    }
}

/// Configuration of a convergence experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub method: Method,
    #[serde(default = "super::default_loss")]
    pub loss: LossKind,
    #[serde(default)]
    pub l2: f64,
    pub source: DataSource,
    #[serde(default = "super::default_preprocessing")]
    pub preprocessing: Preprocessing,
    pub step_size: f64,
    /// Two-loop inner length m; `None` means m = n.
    #[serde(default)]
    pub inner_length: Option<usize>,
    /// Outer units to execute: rounds for the two-loop method, steps for the
    /// single-loop methods.
    pub outer_units: usize,
    #[serde(default = "super::default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "super::default_init_option")]
    pub init_option: InitOption,
    #[serde(default = "super::default_regime")]
    pub regime: Regime,
    #[serde(default = "super::default_checkpoints")]
    pub checkpoints: usize,
}

impl ConvergenceConfig {
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
        if self.outer_units == 0 {
            errors.push("outer_units must be at least 1".into());
        }
        if self.replicates == 0 {
            errors.push("replicates must be at least 1".into());
        }
        if self.checkpoints == 0 {
            errors.push("checkpoints must be at least 1".into());
        }
        errors
    }
}

/// Replicate-mean certificate inputs of a convergence run.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergencePooled {
    /// Mean ‖w₁ − w_S‖² = mean ‖w_S‖² (runs start at the origin).
    pub init_dist_sq: f64,
    /// Mean L_S(w₁) − L_S(w_S).
    pub init_subopt: f64,
    /// The strongly convex per-round decay ratio, when that certificate is
    /// active.
    pub rho: Option<f64>,
}

/// Everything a convergence experiment produces.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub method: Method,
    pub regime: Regime,
    pub n: usize,
    pub inner_length: usize,
    pub outer_units: usize,
    pub step_size: f64,
    /// Pooled certified smoothness (max over replicates).
    pub alpha: f64,
    /// Pooled certified strong convexity (min over replicates).
    pub mu: f64,
    /// Outer-unit checkpoint grid. Convex runs start at 1 (the average
    /// iterate needs a step); strongly convex runs start at 0 (the initial
    /// reference).
    pub grid: Vec<usize>,
    /// Per-checkpoint stats of measured suboptimality.
    pub subopt_stats: Vec<AggregateStats>,
    /// The certificate curve on the same grid, or `None` with a note.
    pub bound: Option<Vec<f64>>,
    pub bound_note: Option<String>,
    pub pooled: ConvergencePooled,
    /// Per-replicate measured suboptimality rows, replicate-id order.
    pub replicate_subopts: Vec<Vec<f64>>,
    /// Per-replicate oracle risks, replicate-id order.
    pub oracle_risks: Vec<f64>,
}

struct ReplicateConvergence {
    subopts: Vec<f64>,
    init_dist_sq: f64,
    init_subopt: f64,
    oracle_risk: f64,
    alpha: f64,
    mu: f64,
}

/// Measured suboptimality at each grid unit, per the regime's convention:
/// convex reads the running average of pre-update iterates, strongly convex
/// reads the iterate itself (the reference for the two-loop method).
fn measure_subopts(
    regime: Regime,
    model: &LossModel,
    data: &Dataset,
    traj: &Trajectory,
    grid: &[usize],
    oracle_risk: f64,
) -> Vec<f64> {
    grid.iter()
        .map(|&t| {
            let risk = match (regime, t) {
                (_, 0) => empirical_risk(model, &traj.initial, data),
                (Regime::Convex, _) => {
                    empirical_risk(model, &traj.average_iterates[t - 1], data)
                }
                (Regime::StronglyConvex, _) => {
                    empirical_risk(model, &traj.outer_iterates[t - 1], data)
                }
            };
            risk - oracle_risk
        })
        .collect()
}

/// Runs the convergence experiment described by `cfg`. Deterministic for
/// every worker count; any replicate failure (divergence, oracle stall)
/// fails the experiment with that replicate's diagnostics.
pub fn run_convergence(
    cfg: &ConvergenceConfig,
    workers: Option<usize>,
) -> Result<ConvergenceReport, HarnessError> {
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
    let full_grid = checkpoint_steps(cfg.outer_units, cfg.checkpoints);
    let grid: Vec<usize> = match cfg.regime {
        // The convex certificate covers the average iterate, which only
        // exists after the first unit.
        Regime::Convex => full_grid.into_iter().skip_while(|&t| t == 0).collect(),
        Regime::StronglyConvex => full_grid,
    };

    let outcomes: Vec<ReplicateConvergence> = run_parallel(cfg.replicates, workers, |r| {
        let seed_r = mix_seed(cfg.base_seed, r as u64);
        let (train, _pool) = base.realize(seed_r, cfg.preprocessing)?;
        let model = LossModel::certified(cfg.loss, &train, cfg.l2)?;
        let oracle = gd_oracle(&model, &train).map_err(|s| HarnessError::Oracle {
            replicate: r,
            iterations: s.iterations,
            grad_norm: s.grad_norm,
        })?;
        let mut stream = IndexStream::new(mix_seed(seed_r, SALT_STREAM));
        let traj = match cfg.method {
            Method::Svrg => svrg_run(
                &model,
                &train,
                &SvrgConfig {
                    step_size: cfg.step_size,
                    inner_length: m,
                    init_option: cfg.init_option,
                    outer_rounds: cfg.outer_units,
                    seed: stream.seed(),
                    record_inner_risks: false,
                },
                &mut stream,
            ),
            Method::Saga => saga_run(
                &model,
                &train,
                &SagaConfig {
                    step_size: cfg.step_size,
                    total_iters: cfg.outer_units,
                    seed: stream.seed(),
                    record_risks: false,
                },
                &mut stream,
            ),
            Method::Sgd => sgd_run(
                &model,
                &train,
                &SagaConfig {
                    step_size: cfg.step_size,
                    total_iters: cfg.outer_units,
                    seed: stream.seed(),
                    record_risks: false,
                },
                &mut stream,
            ),
        }
        .map_err(|source| HarnessError::Replicate { replicate: r, source })?;
        let subopts = measure_subopts(cfg.regime, &model, &train, &traj, &grid, oracle.risk);
        let init_risk = empirical_risk(&model, &traj.initial, &train);
        Ok(ReplicateConvergence {
            subopts,
            init_dist_sq: oracle.minimizer.norm_sq(),
            init_subopt: init_risk - oracle.risk,
            oracle_risk: oracle.risk,
            alpha: model.alpha(),
            mu: model.mu(),
        })
    })?;

    let rows: Vec<Vec<f64>> = outcomes.iter().map(|o| o.subopts.clone()).collect();
    let count = outcomes.len() as f64;
    let alpha = outcomes.iter().map(|o| o.alpha).fold(f64::NEG_INFINITY, f64::max);
    let mu = outcomes.iter().map(|o| o.mu).fold(f64::INFINITY, f64::min);
    let mut pooled = ConvergencePooled {
        init_dist_sq: kahan_sum(outcomes.iter().map(|o| o.init_dist_sq)) / count,
        init_subopt: kahan_sum(outcomes.iter().map(|o| o.init_subopt)) / count,
        rho: None,
    };

    let (bound, bound_note) = match convergence_bound_curve(
        cfg.method, cfg.regime, alpha, mu, cfg.step_size, m, n, &grid, &pooled,
    ) {
        Ok(Some((curve, rho))) => {
            pooled.rho = rho;
            (Some(curve), None)
        }
        Ok(None) => (
            None,
            Some(format!(
                "no convergence certificate for {} in the {:?} regime",
                cfg.method, cfg.regime
            )),
        ),
        Err(e) => (None, Some(format!("certificate disabled: {e}"))),
    };

    Ok(ConvergenceReport {
        method: cfg.method,
        regime: cfg.regime,
        n,
        inner_length: if cfg.method == Method::Svrg { m } else { 1 },
        outer_units: cfg.outer_units,
        step_size: cfg.step_size,
        alpha,
        mu,
        subopt_stats: aggregate_columns(&rows),
        grid,
        bound,
        bound_note,
        pooled,
        replicate_subopts: rows,
        oracle_risks: outcomes.iter().map(|o| o.oracle_risk).collect(),
    })
}

/// Evaluates the matching convergence certificate at every grid unit from
/// pooled inputs; `Ok(None)` when the method/regime pair has none.
#[allow(clippy::too_many_arguments)]
fn convergence_bound_curve(
    method: Method,
    regime: Regime,
    alpha: f64,
    mu: f64,
    step_size: f64,
    m: usize,
    n: usize,
    grid: &[usize],
    pooled: &ConvergencePooled,
) -> Result<Option<(Vec<f64>, Option<f64>)>, BoundError> {
    match (method, regime) {
        (Method::Svrg, Regime::Convex) => {
            let curve = grid
                .iter()
                .map(|&t| {
                    let p = BoundInputs {
                        alpha,
                        mu,
                        step_size,
                        inner_length: m,
                        n,
                        rounds: t,
                    };
                    svrg_suboptimality_convex(&p, pooled.init_dist_sq, pooled.init_subopt)
                })
                .collect::<Result<Vec<f64>, _>>()?;
            Ok(Some((curve, None)))
        }
        (Method::Saga, Regime::Convex) => {
            let curve = grid
                .iter()
                .map(|&t| {
                    let p = BoundInputs {
                        alpha,
                        mu,
                        step_size,
                        inner_length: 1,
                        n,
                        rounds: t,
                    };
                    saga_suboptimality_convex(&p, pooled.init_dist_sq, pooled.init_subopt)
                })
                .collect::<Result<Vec<f64>, _>>()?;
            Ok(Some((curve, None)))
        }
        (Method::Svrg, Regime::StronglyConvex) => {
            if !(mu.is_finite() && mu > 0.0) {
                return Err(BoundError::BadMu);
            }
            let c = m as f64 * step_size * mu;
            let rho = svrg_decay_ratio_sc(step_size, alpha, c)?;
            let curve = grid.iter().map(|&t| rho.powi(t as i32) * pooled.init_subopt).collect();
            Ok(Some((curve, Some(rho))))
        }
        (Method::Saga, Regime::StronglyConvex) | (Method::Sgd, _) => Ok(None),
    }
}
