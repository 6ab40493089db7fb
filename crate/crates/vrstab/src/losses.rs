//! Smooth per-example losses with dataset-certified constants.
//!
//! A [`LossModel`] bundles a loss kind with three certified constants: the
//! uniform smoothness constant α (an upper bound on the gradient Lipschitz
//! constant of every per-example loss), the strong-convexity constant μ (zero
//! unless an explicit ℓ2 term is added), and the ℓ2 coefficient itself. Every
//! per-example loss is nonnegative, convex, and α-smooth, which is exactly
//! what the closed-form certificates in [`crate::bounds`] require.
//!
//! Two classical inequalities for this family are exposed as executable
//! checks (used by the test suites and the `check-losses` CLI command):
//!
//! - self-bounding: ‖∇ℓ(w;z)‖² ≤ 2·α·ℓ(w;z) for nonnegative α-smooth ℓ;
//! - coercivity (co-coercivity): ⟨w−w′, ∇ℓ(w;z)−∇ℓ(w′;z)⟩ ≥
//!   (1/α)·‖∇ℓ(w;z)−∇ℓ(w′;z)‖² for convex α-smooth ℓ.
//!
//! # Loss forms
//!
//! With margin m = y·⟨w,x⟩ (classification) and residual r = ⟨w,x⟩ − y
//! (regression), the unregularized forms are:
//!
//! | kind            | value                                              | curvature bound |
//! |-----------------|----------------------------------------------------|-----------------|
//! | logistic        | log(1 + exp(−m))                                   | ‖x‖²/4          |
//! | least squares   | r²/2                                               | ‖x‖²            |
//! | smoothed hinge  | 0 if m ≥ 1; (1−m)²/(2δ) if 1−δ ≤ m < 1; 1−m−δ/2   | ‖x‖²/δ          |
//! | Huber           | r²/(2δ) if \|r\| ≤ δ; \|r\| − δ/2 otherwise        | ‖x‖²/δ          |
//!
//! The Huber form is the Moreau-envelope parameterization (quadratic of
//! curvature 1/δ near zero), so its certified constant scales as ‖x‖²/δ like
//! the smoothed hinge. An ℓ2 term (l2/2)·‖w‖² is added to every per-example
//! loss when `l2_coefficient > 0`, making each per-example loss l2-strongly
//! convex.
//!
//! Numerical stability: the logistic value is evaluated as
//! `log1p(exp(−|m|)) + max(0, −m)`, which never overflows for finite margins.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::Dataset;
use crate::tol;

/// One training example: a sparse feature vector plus a label.
///
/// Feature indices are 1-based (LIBSVM convention), strictly increasing, and
/// all stored values are finite. Labels are ±1 for classification losses and
/// any finite real for regression losses.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    indices: Vec<u32>,
    values: Vec<f64>,
    label: f64,
}

/// Why a [`Sample`] could not be constructed.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum SampleError {
    #[error("feature index and value lists have different lengths ({indices} vs {values})")]
    LengthMismatch { indices: usize, values: usize },
    #[error("feature index {index} at position {pos} is not strictly increasing (or is zero)")]
    NonIncreasingIndex { index: u32, pos: usize },
    #[error("non-finite feature value at position {pos}")]
    NonFiniteValue { pos: usize },
    #[error("non-finite label")]
    NonFiniteLabel,
}

impl Sample {
    /// Builds a sample, validating the sparse-vector invariants:
    /// 1-based strictly increasing indices and finite values/label.
    pub fn new(indices: Vec<u32>, values: Vec<f64>, label: f64) -> Result<Self, SampleError> {
        if indices.len() != values.len() {
            return Err(SampleError::LengthMismatch {
                indices: indices.len(),
                values: values.len(),
            });
        }
        let mut prev = 0u32; // indices are 1-based, so 0 forces the first to be ≥ 1
        for (pos, &idx) in indices.iter().enumerate() {
            if idx <= prev {
                return Err(SampleError::NonIncreasingIndex { index: idx, pos });
            }
            prev = idx;
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(SampleError::NonFiniteValue { pos });
        }
        if !label.is_finite() {
            return Err(SampleError::NonFiniteLabel);
        }
        Ok(Sample { indices, values, label })
    }

    /// The label y.
    pub fn label(&self) -> f64 {
        self.label
    }

    /// 1-based feature indices, strictly increasing.
    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    /// Feature values aligned with [`Self::indices`].
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest feature index (0 for an empty feature vector).
    pub fn max_index(&self) -> u32 {
        self.indices.last().copied().unwrap_or(0)
    }

    /// Squared ℓ2 norm of the feature vector.
    pub fn feature_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Returns a copy with every feature value multiplied by `factor`.
    pub(crate) fn scaled(&self, factor: f64) -> Sample {
        Sample {
            indices: self.indices.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
            label: self.label,
        }
    }

    /// Returns a copy with the given label.
    pub(crate) fn with_label(&self, label: f64) -> Sample {
        Sample { indices: self.indices.clone(), values: self.values.clone(), label }
    }
}

/// A dense parameter vector.
///
/// Invariant: all coordinates finite. The optimizers check this once per
/// step and report divergence instead of propagating NaN/Inf.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights(pub Vec<f64>);

impl Weights {
    /// The zero vector in `d` dimensions.
    pub fn zeros(d: usize) -> Self {
        Weights(vec![0.0; d])
    }

    /// Dimension d.
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Sparse dot product ⟨w, x⟩.
    ///
    /// # Panics
    /// If the sample's max feature index exceeds the dimension.
    pub fn dot(&self, z: &Sample) -> f64 {
        assert!(
            z.max_index() as usize <= self.0.len(),
            "weight dimension {} < max feature index {}",
            self.0.len(),
            z.max_index()
        );
        let mut acc = 0.0;
        for (&i, &v) in z.indices.iter().zip(&z.values) {
            acc += self.0[(i - 1) as usize] * v;
        }
        acc
    }

    /// Squared ℓ2 norm ‖w‖².
    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum()
    }

    /// ℓ2 norm ‖w‖.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Squared distance ‖w − u‖².
    pub fn dist_sq(&self, u: &Weights) -> f64 {
        debug_assert_eq!(self.0.len(), u.0.len());
        self.0.iter().zip(&u.0).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// In-place w += c·u (dense).
    pub fn add_scaled(&mut self, c: f64, u: &Weights) {
        debug_assert_eq!(self.0.len(), u.0.len());
        for (a, b) in self.0.iter_mut().zip(&u.0) {
            *a += c * *b;
        }
    }

    /// In-place w += c·x (sparse scatter).
    pub fn add_scaled_sample(&mut self, c: f64, z: &Sample) {
        for (&i, &v) in z.indices.iter().zip(&z.values) {
            self.0[(i - 1) as usize] += c * v;
        }
    }

    /// True if every coordinate is finite.
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

/// The supported per-example loss families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// log(1 + exp(−y⟨w,x⟩)); classification, labels ±1.
    Logistic,
    /// (⟨w,x⟩ − y)²/2; regression.
    LeastSquares,
    /// Quadratically smoothed hinge with width δ; classification.
    SmoothedHinge,
    /// Moreau-envelope Huber with width δ; regression.
    Huber,
}

impl LossKind {
    /// Curvature of the scalar link function (second derivative bound with
    /// respect to the margin/residual); the per-example smoothness constant
    /// is this times ‖x‖², plus the ℓ2 coefficient.
    fn link_curvature(self, width_delta: f64) -> f64 {
        match self {
            LossKind::Logistic => 0.25,
            LossKind::LeastSquares => 1.0,
            LossKind::SmoothedHinge | LossKind::Huber => 1.0 / width_delta,
        }
    }
}

/// Why a [`LossModel`] could not be constructed.
#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("smoothness constant must be positive (got {0})")]
    NonPositiveAlpha(f64),
    #[error("strong convexity constant must be nonnegative (got {0})")]
    NegativeMu(f64),
    #[error("smoothness {alpha} must be ≥ strong convexity {mu}")]
    AlphaBelowMu { alpha: f64, mu: f64 },
    #[error("l2 coefficient must be nonnegative (got {0})")]
    NegativeL2(f64),
    #[error("width parameter must be positive (got {0})")]
    NonPositiveWidth(f64),
}

/// A loss family with certified constants.
#[derive(Debug, Clone, PartialEq)]
pub struct LossModel {
    kind: LossKind,
    smoothness_alpha: f64,
    strong_convexity_mu: f64,
    l2_coefficient: f64,
    width_delta: f64,
}

impl LossModel {
    /// Builds a model from explicit constants, validating α > 0, μ ≥ 0,
    /// α ≥ μ, l2 ≥ 0, δ > 0.
    pub fn new(
        kind: LossKind,
        smoothness_alpha: f64,
        strong_convexity_mu: f64,
        l2_coefficient: f64,
        width_delta: f64,
    ) -> Result<Self, ModelError> {
        if !(smoothness_alpha > 0.0) {
            return Err(ModelError::NonPositiveAlpha(smoothness_alpha));
        }
        if !(strong_convexity_mu >= 0.0) {
            return Err(ModelError::NegativeMu(strong_convexity_mu));
        }
        if smoothness_alpha < strong_convexity_mu {
            return Err(ModelError::AlphaBelowMu { alpha: smoothness_alpha, mu: strong_convexity_mu });
        }
        if !(l2_coefficient >= 0.0) {
            return Err(ModelError::NegativeL2(l2_coefficient));
        }
        if !(width_delta > 0.0) {
            return Err(ModelError::NonPositiveWidth(width_delta));
        }
        Ok(LossModel { kind, smoothness_alpha, strong_convexity_mu, l2_coefficient, width_delta })
    }

    /// Builds a model whose constants are certified against `data` via
    /// [`certify_constants`], with width δ = 1.
    pub fn certified(kind: LossKind, data: &Dataset, l2: f64) -> Result<Self, ModelError> {
        Self::certified_with_width(kind, data, l2, 1.0)
    }

    /// As [`Self::certified`] with an explicit width δ (smoothed hinge /
    /// Huber only; ignored by the curvature of the other kinds).
    pub fn certified_with_width(
        kind: LossKind,
        data: &Dataset,
        l2: f64,
        width_delta: f64,
    ) -> Result<Self, ModelError> {
        let (alpha, mu) = certify_constants(kind, data, l2, width_delta);
        Self::new(kind, alpha, mu, l2, width_delta)
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    /// Certified uniform smoothness constant α.
    pub fn alpha(&self) -> f64 {
        self.smoothness_alpha
    }

    /// Certified strong-convexity constant μ (= the ℓ2 coefficient).
    pub fn mu(&self) -> f64 {
        self.strong_convexity_mu
    }

    /// ℓ2 regularization coefficient.
    pub fn l2(&self) -> f64 {
        self.l2_coefficient
    }

    /// Width δ of the smoothed hinge / Huber link.
    pub fn width(&self) -> f64 {
        self.width_delta
    }

    /// Scalar link value and its derivative with respect to ⟨w,x⟩.
    ///
    /// Returns `(base_value, d_base/d_dot)` for the unregularized loss.
    fn link(&self, dot: f64, y: f64) -> (f64, f64) {
        match self.kind {
            LossKind::Logistic => {
                let m = y * dot;
                // Stable: log(1+exp(−m)) = log1p(exp(−|m|)) + max(0, −m).
                let value = (-m.abs()).exp().ln_1p() + (-m).max(0.0);
                // dℓ/dm = −1/(1+exp(m)), evaluated stably on both sides.
                let dm = if m >= 0.0 {
                    let e = (-m).exp();
                    -e / (1.0 + e)
                } else {
                    -1.0 / (1.0 + m.exp())
                };
                (value, dm * y)
            }
            LossKind::LeastSquares => {
                let r = dot - y;
                (0.5 * r * r, r)
            }
            LossKind::SmoothedHinge => {
                let d = self.width_delta;
                let m = y * dot;
                if m >= 1.0 {
                    (0.0, 0.0)
                } else if m >= 1.0 - d {
                    let gap = 1.0 - m;
                    (gap * gap / (2.0 * d), -(gap / d) * y)
                } else {
                    (1.0 - m - d / 2.0, -y)
                }
            }
            LossKind::Huber => {
                let d = self.width_delta;
                let r = dot - y;
                if r.abs() <= d {
                    (r * r / (2.0 * d), r / d)
                } else {
                    (r.abs() - d / 2.0, r.signum())
                }
            }
        }
    }
}

/// Per-example loss ℓ(w;z) plus (l2/2)·‖w‖² when regularized.
///
/// Finite and ≥ 0 for all finite inputs; the logistic branch uses the
/// overflow-free log1p form.
///
/// # Panics
/// If the sample's max feature index exceeds `w.dim()`.
pub fn loss_value(model: &LossModel, w: &Weights, z: &Sample) -> f64 {
    let (base, _) = model.link(w.dot(z), z.label());
    if model.l2_coefficient > 0.0 {
        base + 0.5 * model.l2_coefficient * w.norm_sq()
    } else {
        base
    }
}

/// Dense gradient ∇ℓ(w;z) (+ l2·w when regularized), written into `out`.
///
/// # Panics
/// As [`loss_value`]; additionally if `out.dim() != w.dim()`.
pub fn loss_gradient_into(model: &LossModel, w: &Weights, z: &Sample, out: &mut Weights) {
    assert_eq!(out.dim(), w.dim(), "gradient buffer dimension mismatch");
    let (_, coef) = model.link(w.dot(z), z.label());
    if model.l2_coefficient > 0.0 {
        for (o, wi) in out.0.iter_mut().zip(&w.0) {
            *o = model.l2_coefficient * wi;
        }
    } else {
        out.0.fill(0.0);
    }
    out.add_scaled_sample(coef, z);
}

/// Dense gradient ∇ℓ(w;z) (+ l2·w when regularized).
pub fn loss_gradient(model: &LossModel, w: &Weights, z: &Sample) -> Weights {
    let mut out = Weights::zeros(w.dim());
    loss_gradient_into(model, w, z, &mut out);
    out
}

/// Empirical risk L_S(w) = (1/n)·Σ ℓ(w; z_i), regularization included.
///
/// Accumulated left-to-right in dataset order with compensated (Kahan)
/// summation so the value is independent of call-site context.
///
/// # Panics
/// If the dataset is empty (empirical risk of nothing is a contract
/// violation) or on dimension mismatch.
pub fn empirical_risk(model: &LossModel, w: &Weights, data: &Dataset) -> f64 {
    assert!(data.len() > 0, "empirical risk over an empty dataset");
    let reg = if model.l2_coefficient > 0.0 {
        0.5 * model.l2_coefficient * w.norm_sq()
    } else {
        0.0
    };
    let mut sum = 0.0f64;
    let mut comp = 0.0f64; // Kahan compensation
    for z in data.samples() {
        let (base, _) = model.link(w.dot(z), z.label());
        let term = base + reg;
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum / data.len() as f64
}

/// Full empirical gradient ∇L_S(w) = (1/n)·Σ ∇ℓ(w; z_i), written into `out`.
pub fn empirical_gradient_into(model: &LossModel, w: &Weights, data: &Dataset, out: &mut Weights) {
    assert!(data.len() > 0, "empirical gradient over an empty dataset");
    assert_eq!(out.dim(), w.dim(), "gradient buffer dimension mismatch");
    out.0.fill(0.0);
    for z in data.samples() {
        let (_, coef) = model.link(w.dot(z), z.label());
        out.add_scaled_sample(coef, z);
    }
    let inv_n = 1.0 / data.len() as f64;
    for o in out.0.iter_mut() {
        *o *= inv_n;
    }
    if model.l2_coefficient > 0.0 {
        out.add_scaled(model.l2_coefficient, w);
    }
}

/// Certifies a uniform smoothness constant valid for *every* example, and
/// the strong-convexity constant induced by the ℓ2 term:
///
/// - α = l2 + c·max_j ‖x_j‖², where c is the link curvature (1/4 logistic,
///   1 least squares, 1/δ smoothed hinge and Huber);
/// - μ = l2.
///
/// A dataset whose samples all have empty feature vectors certifies
/// α = μ = l2 (the caller must add regularization to obtain a usable model).
pub fn certify_constants(kind: LossKind, data: &Dataset, l2: f64, width_delta: f64) -> (f64, f64) {
    let max_norm_sq = data
        .samples()
        .iter()
        .map(Sample::feature_norm_sq)
        .fold(0.0f64, f64::max);
    (l2 + kind.link_curvature(width_delta) * max_norm_sq, l2)
}

/// Outcome of sampling one of the analytic inequality checks.
#[derive(Debug, Clone, Copy)]
pub struct InequalityReport {
    /// Number of random pairs evaluated.
    pub pairs: usize,
    /// Largest observed violation of the inequality, normalized by
    /// max(1, magnitude of the compared sides) so the slack is relative for
    /// large values and absolute near zero (0 if the inequality never
    /// failed; compare against [`tol::INEQUALITY_SLACK`]).
    pub max_violation: f64,
}

impl InequalityReport {
    /// True if the inequality held everywhere up to the standard slack.
    pub fn holds(&self) -> bool {
        self.max_violation <= tol::INEQUALITY_SLACK
    }
}

/// Draws a random weight vector with coordinates ~ N(0, scale²).
fn random_weights(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Weights {
    let mut w = Weights::zeros(d);
    for c in w.0.iter_mut() {
        *c = scale * rng.sample::<f64, _>(rand_distr::StandardNormal);
    }
    w
}

/// Checks the self-bounding inequality ‖∇ℓ(w;z)‖² ≤ 2·α·ℓ(w;z) at `pairs`
/// random (w, z) pairs, with w Gaussian at mixed scales (so both the smooth
/// interior and the piecewise branches of hinge/Huber are exercised) and z
/// drawn uniformly from `data`. α is the model's certified constant.
pub fn check_self_bounding(model: &LossModel, data: &Dataset, pairs: usize, seed: u64) -> InequalityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = data.dimension();
    let mut grad = Weights::zeros(d);
    let mut max_violation = 0.0f64;
    for _ in 0..pairs {
        let scale = [0.03, 0.3, 1.0, 3.0][rng.gen_range(0..4)];
        let w = random_weights(&mut rng, d, scale);
        let z = &data.samples()[rng.gen_range(0..data.len())];
        loss_gradient_into(model, &w, z, &mut grad);
        let lhs = grad.norm_sq();
        let rhs = 2.0 * model.alpha() * loss_value(model, &w, z);
        max_violation = max_violation.max((lhs - rhs) / lhs.abs().max(rhs.abs()).max(1.0));
    }
    InequalityReport { pairs, max_violation }
}

/// Checks coercivity ⟨w−w′, ∇ℓ(w;z)−∇ℓ(w′;z)⟩ ≥ (1/α)·‖∇ℓ(w;z)−∇ℓ(w′;z)‖²
/// at `pairs` random (w, w′, z) triples.
pub fn check_coercivity(model: &LossModel, data: &Dataset, pairs: usize, seed: u64) -> InequalityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = data.dimension();
    let mut g = Weights::zeros(d);
    let mut g2 = Weights::zeros(d);
    let mut max_violation = 0.0f64;
    for _ in 0..pairs {
        let scale = [0.03, 0.3, 1.0, 3.0][rng.gen_range(0..4)];
        let w = random_weights(&mut rng, d, scale);
        let w2 = random_weights(&mut rng, d, scale);
        let z = &data.samples()[rng.gen_range(0..data.len())];
        loss_gradient_into(model, &w, z, &mut g);
        loss_gradient_into(model, &w2, z, &mut g2);
        let mut inner = 0.0;
        let mut diff_sq = 0.0;
        for i in 0..d {
            let dw = w.0[i] - w2.0[i];
            let dg = g.0[i] - g2.0[i];
            inner += dw * dg;
            diff_sq += dg * dg;
        }
        let lhs = diff_sq / model.alpha();
        max_violation =
            max_violation.max((lhs - inner) / lhs.abs().max(inner.abs()).max(1.0));
    }
    InequalityReport { pairs, max_violation }
}

/// Checks the (strong) convexity lower bound
/// ℓ(w;z) ≥ ℓ(w′;z) + ⟨w−w′, ∇ℓ(w′;z)⟩ + (μ/2)·‖w−w′‖² at random pairs.
pub fn check_convexity_lower_bound(
    model: &LossModel,
    data: &Dataset,
    pairs: usize,
    seed: u64,
) -> InequalityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = data.dimension();
    let mut g2 = Weights::zeros(d);
    let mut max_violation = 0.0f64;
    for _ in 0..pairs {
        let scale = [0.03, 0.3, 1.0, 3.0][rng.gen_range(0..4)];
        let w = random_weights(&mut rng, d, scale);
        let w2 = random_weights(&mut rng, d, scale);
        let z = &data.samples()[rng.gen_range(0..data.len())];
        loss_gradient_into(model, &w2, z, &mut g2);
        let mut inner = 0.0;
        let mut dist_sq = 0.0;
        for i in 0..d {
            let dw = w.0[i] - w2.0[i];
            inner += dw * g2.0[i];
            dist_sq += dw * dw;
        }
        let rhs = loss_value(model, &w2, z) + inner + 0.5 * model.mu() * dist_sq;
        let lhs = loss_value(model, &w, z);
        max_violation =
            max_violation.max((rhs - lhs) / lhs.abs().max(rhs.abs()).max(1.0));
    }
    InequalityReport { pairs, max_violation }
}

/// Outcome of the finite-difference gradient check.
#[derive(Debug, Clone, Copy)]
pub struct GradientCheckReport {
    /// Number of random (w, z) pairs evaluated.
    pub pairs: usize,
    /// Worst relative error between the analytic gradient coordinate-set and
    /// the central finite difference (relative to the larger of the two
    /// norms, floored at 1 to keep near-zero gradients meaningful).
    pub max_rel_error: f64,
}

impl GradientCheckReport {
    /// True if every pair matched within [`tol::FD_REL_ERROR`].
    pub fn holds(&self) -> bool {
        self.max_rel_error <= tol::FD_REL_ERROR
    }
}

/// Compares [`loss_gradient`] against central finite differences of
/// [`loss_value`] at `pairs` random (w, z) pairs.
///
/// The finite difference perturbs every coordinate by ±[`tol::FD_STEP`];
/// the error is measured as ‖∇_analytic − ∇_fd‖ / max(1, ‖∇_fd‖).
pub fn check_gradient_finite_difference(
    model: &LossModel,
    data: &Dataset,
    pairs: usize,
    seed: u64,
) -> GradientCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = data.dimension();
    let h = tol::FD_STEP;
    let mut max_rel_error = 0.0f64;
    for _ in 0..pairs {
        let scale = [0.1, 1.0, 3.0][rng.gen_range(0..3)];
        let mut w = random_weights(&mut rng, d, scale);
        let z = &data.samples()[rng.gen_range(0..data.len())];
        let analytic = loss_gradient(model, &w, z);
        let mut err_sq = 0.0;
        let mut fd_sq = 0.0;
        for i in 0..d {
            let orig = w.0[i];
            w.0[i] = orig + h;
            let up = loss_value(model, &w, z);
            w.0[i] = orig - h;
            let down = loss_value(model, &w, z);
            w.0[i] = orig;
            let fd = (up - down) / (2.0 * h);
            err_sq += (analytic.0[i] - fd) * (analytic.0[i] - fd);
            fd_sq += fd * fd;
        }
        let rel = err_sq.sqrt() / fd_sq.sqrt().max(1.0);
        max_rel_error = max_rel_error.max(rel);
    }
    GradientCheckReport { pairs, max_rel_error }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, preprocess, SyntheticSpec};
    use approx::assert_abs_diff_eq;

    fn sample(idx: &[u32], val: &[f64], y: f64) -> Sample {
        Sample::new(idx.to_vec(), val.to_vec(), y).unwrap()
    }

    fn model(kind: LossKind, alpha: f64, l2: f64) -> LossModel {
        LossModel::new(kind, alpha, l2, l2, 1.0).unwrap()
    }

    /// Classification-shaped dataset (unit-norm features, ±1 labels).
    fn classification_data() -> Dataset {
        let spec = SyntheticSpec::new(8, Weights(vec![1.0, -0.5, 0.25, 0.0, 0.5, -1.0, 0.75, -0.25]), 0.3, 11).unwrap();
        preprocess(&generate_synthetic(&spec, 64)).unwrap()
    }

    /// Regression-shaped dataset (raw Gaussian features, real labels).
    fn regression_data() -> Dataset {
        let spec = SyntheticSpec::new(6, Weights(vec![1.0, 0.5, -0.5, 0.25, 0.0, -1.0]), 0.5, 13).unwrap();
        generate_synthetic(&spec, 64)
    }

    #[test]
    fn sample_rejects_invalid_sparse_vectors() {
        assert!(matches!(
            Sample::new(vec![1, 1], vec![1.0, 2.0], 0.0),
            Err(SampleError::NonIncreasingIndex { index: 1, pos: 1 })
        ));
        assert!(matches!(
            Sample::new(vec![3, 2], vec![1.0, 2.0], 0.0),
            Err(SampleError::NonIncreasingIndex { index: 2, pos: 1 })
        ));
        assert!(matches!(
            Sample::new(vec![0], vec![1.0], 0.0),
            Err(SampleError::NonIncreasingIndex { index: 0, pos: 0 })
        ));
        assert!(matches!(
            Sample::new(vec![1], vec![f64::NAN], 0.0),
            Err(SampleError::NonFiniteValue { pos: 0 })
        ));
        assert!(matches!(Sample::new(vec![1], vec![1.0], f64::INFINITY), Err(SampleError::NonFiniteLabel)));
        assert!(matches!(
            Sample::new(vec![1, 2], vec![1.0], 0.0),
            Err(SampleError::LengthMismatch { indices: 2, values: 1 })
        ));
    }

    #[test]
    fn model_validates_constant_ordering() {
        assert!(LossModel::new(LossKind::Logistic, 0.0, 0.0, 0.0, 1.0).is_err());
        assert!(LossModel::new(LossKind::Logistic, 0.25, 0.5, 0.5, 1.0).is_err());
        assert!(LossModel::new(LossKind::Logistic, 0.25, 0.0, -0.1, 1.0).is_err());
        assert!(LossModel::new(LossKind::Huber, 1.0, 0.0, 0.0, 0.0).is_err());
        assert!(LossModel::new(LossKind::Logistic, 0.25, 0.0, 0.0, 1.0).is_ok());
    }

    #[test]
    fn logistic_value_at_zero_weights_is_log_two() {
        let m = model(LossKind::Logistic, 0.25, 0.0);
        let w = Weights::zeros(3);
        let z = sample(&[1, 3], &[0.5, -2.0], 1.0);
        assert_abs_diff_eq!(loss_value(&m, &w, &z), std::f64::consts::LN_2, epsilon = 1e-15);
    }

    #[test]
    fn logistic_value_matches_high_precision_closed_form() {
        // ln(1 + e^{-1}) computed independently with extended precision:
        // e^{-1} = 0.36787944117144233, ln(1.36787944117144233) =
        // 0.31326168751822286.
        let m = model(LossKind::Logistic, 0.25, 0.0);
        let w = Weights(vec![1.0, 0.0]);
        let z = sample(&[1], &[1.0], 1.0);
        assert_abs_diff_eq!(loss_value(&m, &w, &z), 0.31326168751822286, epsilon = 1e-15);
    }

    #[test]
    fn logistic_value_is_finite_and_exact_at_extreme_margins() {
        let m = model(LossKind::Logistic, 0.25, 0.0);
        let w = Weights(vec![1000.0]);
        let z_pos = sample(&[1], &[1.0], 1.0);
        let z_neg = sample(&[1], &[1.0], -1.0);
        // Margin +1000: loss ≈ e^{-1000} ≈ 0; margin −1000: loss ≈ 1000.
        assert!(loss_value(&m, &w, &z_pos) >= 0.0 && loss_value(&m, &w, &z_pos) < 1e-300);
        assert_abs_diff_eq!(loss_value(&m, &w, &z_neg), 1000.0, epsilon = 1e-12);
        assert!(loss_gradient(&m, &w, &z_neg).is_finite());
    }

    #[test]
    fn least_squares_value_at_zero_is_half_label_squared() {
        let m = model(LossKind::LeastSquares, 1.0, 0.0);
        let w = Weights::zeros(2);
        let z = sample(&[1, 2], &[0.3, 0.4], 3.0);
        assert_abs_diff_eq!(loss_value(&m, &w, &z), 4.5, epsilon = 1e-15);
    }

    #[test]
    fn logistic_gradient_at_zero_is_minus_half_label_times_features() {
        let m = model(LossKind::Logistic, 0.25, 0.0);
        let w = Weights::zeros(3);
        let z = sample(&[1, 3], &[0.6, -0.8], 1.0);
        let g = loss_gradient(&m, &w, &z);
        assert_abs_diff_eq!(g.0[0], -0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(g.0[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.0[2], 0.4, epsilon = 1e-15);
    }

    #[test]
    fn least_squares_gradient_matches_residual_times_features() {
        let m = model(LossKind::LeastSquares, 1.0, 0.0);
        let w = Weights(vec![1.0, 1.0]);
        let z = sample(&[1], &[1.0], 0.0);
        let g = loss_gradient(&m, &w, &z);
        assert_abs_diff_eq!(g.0[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.0[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn huber_gradient_saturates_beyond_the_width() {
        // width δ=1, residual 5 (far branch): gradient = sign(r)·x, so its
        // magnitude is exactly δ·‖x‖ = ‖x‖.
        let m = model(LossKind::Huber, 1.0, 0.0);
        let w = Weights(vec![5.0, 0.0]);
        let z = sample(&[1, 2], &[1.0, 2.0], 0.0); // residual = 5
        let g = loss_gradient(&m, &w, &z);
        assert_abs_diff_eq!(g.0[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.0[1], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.norm(), z.feature_norm_sq().sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn smoothed_hinge_has_three_branches() {
        let m = model(LossKind::SmoothedHinge, 1.0, 0.0);
        let z = sample(&[1], &[1.0], 1.0);
        // margin 2 ≥ 1: flat zero.
        assert_eq!(loss_value(&m, &Weights(vec![2.0]), &z), 0.0);
        // margin 0.5 in [0, 1): quadratic (1−0.5)²/2 = 0.125.
        assert_abs_diff_eq!(loss_value(&m, &Weights(vec![0.5]), &z), 0.125, epsilon = 1e-15);
        // margin −1 < 0: linear 1−(−1)−1/2 = 1.5.
        assert_abs_diff_eq!(loss_value(&m, &Weights(vec![-1.0]), &z), 1.5, epsilon = 1e-15);
        // Value and gradient are continuous across both joints.
        for joint in [1.0, 0.0] {
            let lo = loss_value(&m, &Weights(vec![joint - 1e-9]), &z);
            let hi = loss_value(&m, &Weights(vec![joint + 1e-9]), &z);
            assert_abs_diff_eq!(lo, hi, epsilon = 1e-8);
        }
    }

    #[test]
    fn empirical_risk_matches_hand_computed_means() {
        let m = model(LossKind::LeastSquares, 1.0, 0.0);
        let data = Dataset::new(vec![
            sample(&[1], &[1.0], 1.0),
            sample(&[2], &[1.0], 0.0),
        ])
        .unwrap();
        // (½·1 + ½·0)/2 = 0.25 at w = 0.
        assert_abs_diff_eq!(empirical_risk(&m, &Weights::zeros(2), &data), 0.25, epsilon = 1e-15);

        let ml = model(LossKind::Logistic, 0.25, 0.0);
        assert_abs_diff_eq!(
            empirical_risk(&ml, &Weights::zeros(2), &data),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
    }

    #[test]
    fn empirical_risk_of_identical_samples_equals_single_loss() {
        let m = model(LossKind::Logistic, 0.25, 0.0);
        let z = sample(&[1, 2], &[0.6, 0.8], -1.0);
        let data = Dataset::new(vec![z.clone(), z.clone()]).unwrap();
        let w = Weights(vec![0.3, -0.7]);
        assert_abs_diff_eq!(empirical_risk(&m, &w, &data), loss_value(&m, &w, &z), epsilon = 1e-15);
    }

    #[test]
    fn certify_constants_matches_curvature_formulas() {
        // Unit-norm features: logistic α = 1/4, μ = 0.
        let unit = Dataset::new(vec![sample(&[1, 2], &[0.6, 0.8], 1.0), sample(&[1], &[1.0], -1.0)]).unwrap();
        assert_eq!(certify_constants(LossKind::Logistic, &unit, 0.0, 1.0), (0.25, 0.0));
        // Least squares with l2 = 0.1 on unit-norm features: α = 1.1, μ = 0.1.
        let (a, mu) = certify_constants(LossKind::LeastSquares, &unit, 0.1, 1.0);
        assert_abs_diff_eq!(a, 1.1, epsilon = 1e-15);
        assert_abs_diff_eq!(mu, 0.1, epsilon = 1e-15);
        // Width δ = 0.5 doubles the hinge/Huber curvature.
        let (a, _) = certify_constants(LossKind::SmoothedHinge, &unit, 0.0, 0.5);
        assert_abs_diff_eq!(a, 2.0, epsilon = 1e-15);
        // Empty feature vectors contribute nothing: α = μ = l2.
        let empty = Dataset::new(vec![sample(&[], &[], 1.0), sample(&[], &[], -1.0)]).unwrap();
        assert_eq!(certify_constants(LossKind::Logistic, &empty, 0.3, 1.0), (0.3, 0.3));
    }

    #[test]
    fn gradients_match_finite_differences_for_all_kinds() {
        let cls = classification_data();
        let reg = regression_data();
        for (kind, data, l2) in [
            (LossKind::Logistic, &cls, 0.0),
            (LossKind::Logistic, &cls, 0.1),
            (LossKind::LeastSquares, &reg, 0.0),
            (LossKind::SmoothedHinge, &cls, 0.05),
            (LossKind::Huber, &reg, 0.0),
        ] {
            let m = LossModel::certified(kind, data, l2).unwrap();
            let report = check_gradient_finite_difference(&m, data, 100, 17);
            assert!(
                report.holds(),
                "{kind:?} (l2={l2}): max rel error {}",
                report.max_rel_error
            );
        }
    }

    #[test]
    fn self_bounding_and_coercivity_hold_at_sampled_pairs() {
        let cls = classification_data();
        let reg = regression_data();
        for (kind, data, l2) in [
            (LossKind::Logistic, &cls, 0.0),
            (LossKind::Logistic, &cls, 0.1),
            (LossKind::LeastSquares, &reg, 0.0),
            (LossKind::SmoothedHinge, &cls, 0.0),
            (LossKind::Huber, &reg, 0.1),
        ] {
            let m = LossModel::certified(kind, data, l2).unwrap();
            let sb = check_self_bounding(&m, data, 2000, 23);
            assert!(sb.holds(), "{kind:?} self-bounding violated by {}", sb.max_violation);
            let co = check_coercivity(&m, data, 2000, 29);
            assert!(co.holds(), "{kind:?} coercivity violated by {}", co.max_violation);
            let cv = check_convexity_lower_bound(&m, data, 2000, 31);
            assert!(cv.holds(), "{kind:?} convexity bound violated by {}", cv.max_violation);
        }
    }

    #[test]
    fn loss_values_are_nonnegative_at_random_points() {
        let cls = classification_data();
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for kind in [LossKind::Logistic, LossKind::LeastSquares, LossKind::SmoothedHinge, LossKind::Huber] {
            let m = LossModel::certified(kind, &cls, 0.01).unwrap();
            for _ in 0..200 {
                let w = random_weights(&mut rng, cls.dimension(), 2.0);
                let z = &cls.samples()[rng.gen_range(0..cls.len())];
                assert!(loss_value(&m, &w, &z) >= 0.0);
            }
        }
    }
}
