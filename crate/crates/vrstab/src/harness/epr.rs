//! Excess-population-risk sweeps on the Gaussian linear model, where the
//! regularized population risk and its minimum are available in closed form,
//! so the decay of the excess risk with the sample size can be measured
//! exactly and summarized by a log-log slope.

use serde::{Deserialize, Serialize};

use super::{
    aggregate, config_error, mix_seed, run_parallel, AggregateStats, HarnessError, SALT_DATA,
    SALT_STREAM,
};
use crate::bounds::{select_params, Regime};
use crate::data::{generate_synthetic, population_risk_ls, SyntheticSpec};
use crate::losses::{LossKind, LossModel, Weights};
use crate::optim::{
    average_iterate, saga_run, svrg_run, IndexStream, InitOption, Method, SagaConfig, SvrgConfig,
};

/// Regularized population risk of the Gaussian linear model:
/// ½(‖w − w°‖² + σ²) + (λ/2)‖w‖².
pub fn population_risk_regularized(spec: &SyntheticSpec, l2: f64, w: &Weights) -> f64 {
    population_risk_ls(spec, w) + 0.5 * l2 * w.norm_sq()
}

/// The minimizer and minimum of the regularized population risk: the
/// stationarity condition (w − w°) + λw = 0 gives w* = w°/(1 + λ).
pub fn population_minimum_regularized(spec: &SyntheticSpec, l2: f64) -> (Weights, f64) {
    let mut w_star = spec.target().clone();
    let shrink = 1.0 / (1.0 + l2);
    for c in &mut w_star.0 {
        *c *= shrink;
    }
    let value = population_risk_regularized(spec, l2, &w_star);
    (w_star, value)
}

/// Least-squares slope of ln(mean) against ln(n). Returns 0 with fewer than
/// two points and NaN when any mean is nonpositive or non-finite (the
/// log-log fit is undefined there).
pub fn fit_loglog_slope(ns: &[f64], means: &[f64]) -> f64 {
    assert_eq!(ns.len(), means.len(), "slope fit needs aligned inputs");
    if ns.len() < 2 {
        return 0.0;
    }
    if means.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
        return f64::NAN;
    }
    let xs: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let ys: Vec<f64> = means.iter().map(|m| m.ln()).collect();
    let k = xs.len() as f64;
    let x_bar = xs.iter().sum::<f64>() / k;
    let y_bar = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - x_bar) * (y - y_bar)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - x_bar) * (x - x_bar)).sum();
    sxy / sxx
}

fn default_pairs_per_n() -> usize {
    200
}

/// Configuration of an excess-population-risk sweep. The loss is the
/// squared loss by construction (the population risk must be closed-form);
/// algorithm parameters come from the regime's parameter selection at each
/// sample size.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EprConfig {
    pub method: Method,
    #[serde(default)]
    pub l2: f64,
    pub dimension: usize,
    pub target: Vec<f64>,
    pub noise_sigma: f64,
    /// Sample sizes to sweep, strictly increasing.
    pub n_grid: Vec<usize>,
    #[serde(default = "default_pairs_per_n")]
    pub pairs_per_n: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "super::default_regime")]
    pub regime: Regime,
}

impl EprConfig {
    /// All validation failures, itemized (empty = valid).
    pub fn validation_errors(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if self.method == Method::Sgd {
            errors.push("method sgd has no parameter selection; use svrg or saga".into());
        }
        if self.dimension == 0 {
            errors.push("dimension must be at least 1".into());
        }
        if self.target.len() != self.dimension {
            errors.push(format!(
                "target has {} entries, expected {}",
                self.target.len(),
                self.dimension
            ));
        }
        if !self.target.iter().all(|c| c.is_finite()) {
            errors.push("target entries must be finite".into());
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            errors.push(format!("noise_sigma must be ≥ 0 (got {})", self.noise_sigma));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            errors.push(format!("l2 must be ≥ 0 (got {})", self.l2));
        }
        if self.regime == Regime::StronglyConvex && !(self.l2 > 0.0) {
            errors.push("the strongly convex sweep needs l2 > 0".into());
        }
        if self.n_grid.is_empty() {
            errors.push("n_grid must not be empty".into());
        }
        if self.n_grid.iter().any(|&n| n < 2) {
            errors.push("every n_grid entry must be at least 2".into());
        }
        if self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            errors.push("n_grid must be strictly increasing".into());
        }
        if self.pairs_per_n == 0 {
            errors.push("pairs_per_n must be at least 1".into());
        }
        errors
    }
}

/// Everything an excess-population-risk sweep produces.
#[derive(Debug, Clone)]
pub struct EprReport {
    pub method: Method,
    pub regime: Regime,
    pub l2: f64,
    pub n_grid: Vec<usize>,
    pub pairs_per_n: usize,
    /// Per sample size, stats of the measured excess population risk.
    pub stats: Vec<AggregateStats>,
    /// Log-log slope fitted over the rows up to and including each row
    /// (first row 0 by convention).
    pub slopes: Vec<f64>,
    /// Raw per-pair values: `values[i][p]` = pair p at `n_grid[i]`.
    pub values: Vec<Vec<f64>>,
    /// The closed-form regularized population minimum all values subtract.
    pub population_minimum: f64,
}

/// Runs the sweep: for every sample size and pair, draw a fresh raw dataset,
/// select the regime's parameters, optimize, and score the designated
/// iterate by closed-form excess population risk. Deterministic for every
/// worker count.
pub fn run_epr_sweep(cfg: &EprConfig, workers: Option<usize>) -> Result<EprReport, HarnessError> {
    let errors = cfg.validation_errors();
    if !errors.is_empty() {
        return Err(config_error(errors));
    }
    let target = Weights(cfg.target.clone());
    // The population minimum depends only on (target, σ, λ), not the seed.
    let template = SyntheticSpec::new(cfg.dimension, target.clone(), cfg.noise_sigma, 0)?;
    let (_, population_minimum) = population_minimum_regularized(&template, cfg.l2);
    let initial_risk =
        population_risk_regularized(&template, cfg.l2, &Weights::zeros(cfg.dimension));
    let mu = if cfg.l2 > 0.0 { Some(cfg.l2) } else { None };

    let jobs = cfg.n_grid.len() * cfg.pairs_per_n;
    let flat: Vec<f64> = run_parallel(jobs, workers, |job| {
        let n_index = job / cfg.pairs_per_n;
        let pair = job % cfg.pairs_per_n;
        let n = cfg.n_grid[n_index];
        let seed_np = mix_seed(mix_seed(cfg.base_seed, n_index as u64 + 1), pair as u64);
        let spec = template.with_seed(mix_seed(seed_np, SALT_DATA));
        let data = generate_synthetic(&spec, n);
        let model = LossModel::certified(LossKind::LeastSquares, &data, cfg.l2)?;
        let params = select_params(cfg.regime, cfg.method, n, initial_risk, model.alpha(), mu)?;
        let mut stream = IndexStream::new(mix_seed(seed_np, SALT_STREAM));
        let wrap = |source| HarnessError::Replicate { replicate: job, source };
        let traj = match cfg.method {
            Method::Svrg => svrg_run(
                &model,
                &data,
                &SvrgConfig {
                    step_size: params.step_size,
                    inner_length: params.inner_length,
                    init_option: match cfg.regime {
                        Regime::Convex => InitOption::LastIterate,
                        Regime::StronglyConvex => InitOption::Reference,
                    },
                    outer_rounds: params.rounds,
                    seed: stream.seed(),
                    record_inner_risks: false,
                },
                &mut stream,
            )
            .map_err(wrap)?,
            Method::Saga => saga_run(
                &model,
                &data,
                &SagaConfig {
                    step_size: params.step_size,
                    total_iters: params.rounds,
                    seed: stream.seed(),
                    record_risks: false,
                },
                &mut stream,
            )
            .map_err(wrap)?,
            Method::Sgd => unreachable!("validation rejects the baseline method"),
        };
        // Convex theory covers the averaged iterate, strongly convex theory
        // the final reference (or iterate).
        let scored = match cfg.regime {
            Regime::Convex => average_iterate(&traj).expect("at least one outer unit"),
            Regime::StronglyConvex => {
                traj.outer_iterates.last().expect("at least one outer unit")
            }
        };
        Ok(population_risk_regularized(&spec, cfg.l2, scored) - population_minimum)
    })?;

    let values: Vec<Vec<f64>> =
        cfg.n_grid.iter().enumerate().map(|(i, _)| {
            flat[i * cfg.pairs_per_n..(i + 1) * cfg.pairs_per_n].to_vec()
        }).collect();
    let stats: Vec<AggregateStats> = values.iter().map(|row| aggregate(row)).collect();
    let ns: Vec<f64> = cfg.n_grid.iter().map(|&n| n as f64).collect();
    let means: Vec<f64> = stats.iter().map(|s| s.mean).collect();
    let slopes: Vec<f64> =
        (0..ns.len()).map(|i| fit_loglog_slope(&ns[..=i], &means[..=i])).collect();

    Ok(EprReport {
        method: cfg.method,
        regime: cfg.regime,
        l2: cfg.l2,
        n_grid: cfg.n_grid.clone(),
        pairs_per_n: cfg.pairs_per_n,
        stats,
        slopes,
        values,
        population_minimum,
    })
}
