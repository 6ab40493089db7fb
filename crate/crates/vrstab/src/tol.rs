//! Centralized numeric tolerances with their justification.
//!
//! Every tolerance used by the library's checks and by the test suites is
//! defined here with a note on where it comes from. No ad-hoc magic numbers
//! at call sites.

/// Slack for *exact* algebraic identities evaluated in f64.
///
/// Used where two evaluation orders of the same quantity are compared
/// (e.g. an incrementally maintained mean versus a direct mean, or a
/// streaming average versus a stored-iterate average). f64 has ~15.9
/// significant digits; 1e-12 allows a few hundred ulps of accumulated
/// reassociation error on O(1)-magnitude values.
pub const EXACT_IDENTITY: f64 = 1e-12;

/// Slack for identities that average O(n) gradient terms.
///
/// Summing n ≈ 10³ terms of O(1) magnitude accumulates up to n·ε ≈ 1e-13
/// of rounding; 1e-10 leaves two orders of headroom. Used for the
/// unbiasedness identities (mean of variance-reduced gradients over all
/// index choices equals the full gradient).
pub const MEAN_IDENTITY: f64 = 1e-10;

/// Absolute slack when checking the analytic inequalities (self-bounding,
/// coercivity, convexity lower bound) at sampled points.
///
/// The inequalities hold exactly in real arithmetic; 1e-12 absorbs f64
/// rounding in the two-sided evaluation at O(1) magnitudes.
pub const INEQUALITY_SLACK: f64 = 1e-12;

/// Relative error allowed between an analytic gradient and a central finite
/// difference of the loss value at step [`FD_STEP`].
///
/// Central differences have O(h²) = 1e-12 truncation error and O(ε/h) = 1e-10
/// cancellation error at h = 1e-6; 1e-5 is conservative against both for
/// gradients of O(1) magnitude.
pub const FD_REL_ERROR: f64 = 1e-5;

/// Step for central finite differences; balances truncation (O(h²)) against
/// cancellation (O(ε/h)) for f64.
pub const FD_STEP: f64 = 1e-6;

/// Gradient-norm threshold at which the full-gradient-descent oracle declares
/// the empirical minimizer found. For the smooth strongly-convex instances it
/// is run on, ‖∇L‖ ≤ 1e-10 puts the iterate within ~1e-10/μ of the minimizer,
/// far below every statistical slack used in comparisons.
pub const ORACLE_GRAD_TOL: f64 = 1e-10;

/// Consistency slack between a recorded distance and its recorded square
/// (sq = d² up to one rounding).
pub const SQUARE_BOOKKEEPING: f64 = 1e-12;
