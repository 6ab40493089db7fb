//! Variance-reduced stochastic optimization with measurable stability.
//!
//! This crate implements three first-order optimizers for finite-sum
//! empirical risk minimization — SVRG (two-loop, with a periodically refreshed
//! reference gradient), SAGA (per-example stored-gradient table), and plain
//! SGD as a baseline — together with the machinery needed to *measure* their
//! algorithmic stability and convergence and to compare both against
//! closed-form certificates:
//!
//! - [`losses`]: smooth per-example losses (logistic, least squares, smoothed
//!   hinge, Huber) with dataset-certified smoothness/strong-convexity
//!   constants and executable forms of the self-bounding and coercivity
//!   inequalities.
//! - [`data`]: LIBSVM text ingestion, label binarization + unit-norm
//!   preprocessing, seeded train/holdout splits, neighboring-dataset
//!   construction (one replaced example), and a Gaussian synthetic family
//!   with an exact closed-form population risk.
//! - [`optim`]: the three optimizers driven by a seeded [`optim::IndexStream`]
//!   so that two runs on neighboring datasets can share every random choice
//!   (index sampling and reference selection) — the coupling that makes
//!   per-realization stability traces meaningful.
//! - [`bounds`]: closed-form evaluators for the stability, optimization-error
//!   and generalization-gap certificates along with the parameter-regime
//!   selectors; every evaluator rejects inputs outside its certificate's
//!   stated step-size/regime conditions.
//! - [`harness`]: coupled stability experiments, convergence experiments
//!   against a full-gradient-descent oracle, excess-population-risk scaling
//!   sweeps, replicate aggregation, bound-vs-measurement comparison, and
//!   deterministic CSV/SVG emission.
//!
//! # Determinism
//!
//! Every experiment output is a pure function of its configuration: replicate
//! seeds are derived with a fixed 64-bit mixer, random draws come from
//! ChaCha8 streams, replicates are aggregated in replicate-id order with
//! compensated summation, and file emission renders floats with Rust's
//! shortest-round-trip formatting. Re-running any experiment — with any
//! worker count — produces byte-identical artifacts.

pub mod bounds;
pub mod data;
pub mod harness;
pub mod losses;
pub mod optim;
pub mod tol;
