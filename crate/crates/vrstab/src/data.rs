//! Dataset handling: LIBSVM parsing, preprocessing, splits, neighboring
//! datasets, and a synthetic linear-model generator.
//!
//! Two dataset constructions matter for the stability experiments:
//!
//! - [`make_neighbor`] builds a pair (S, S′) differing in exactly one
//!   example — the "neighboring datasets" on which coupled optimizer runs
//!   measure algorithmic stability;
//! - [`generate_synthetic`] draws i.i.d. examples from a known linear model
//!   with Gaussian features and noise, for which
//!   [`population_risk_ls`] gives the exact population risk of the
//!   unregularized least-squares loss in closed form.
//!
//! All randomized operations take an explicit seed and are deterministic
//! across platforms (counter-based ChaCha streams, no `HashMap` iteration,
//! no thread timing).

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use thiserror::Error;

use crate::losses::{Sample, SampleError, Weights};

/// An ordered collection of [`Sample`]s with a common ambient dimension.
///
/// The dimension is the largest feature index occurring in any sample (0 if
/// every sample has an empty feature vector); weight vectors interacting
/// with the dataset must have at least this dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    dimension: usize,
}

impl Dataset {
    /// Wraps validated samples, inferring the ambient dimension.
    pub fn new(samples: Vec<Sample>) -> Result<Self, DataError> {
        let dimension = samples.iter().map(|s| s.max_index() as usize).max().unwrap_or(0);
        Ok(Dataset { samples, dimension })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// Number of examples n.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Ambient dimension d (largest feature index present).
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Returns a copy with the 0-based `position` replaced by `sample`.
    fn with_replaced(&self, position: usize, sample: Sample) -> Dataset {
        let mut samples = self.samples.clone();
        samples[position] = sample;
        let dimension = samples.iter().map(|s| s.max_index() as usize).max().unwrap_or(0);
        Dataset { samples, dimension }
    }
}

/// Errors from dataset-level operations (splitting, neighboring,
/// preprocessing, synthesis).
#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("train fraction must lie in (0, 1] (got {0})")]
    BadFraction(f64),
    #[error("operation requires a non-empty dataset")]
    EmptyDataset,
    #[error("replacement pool is empty")]
    EmptyPool,
    #[error("preprocessing requires at least two distinct labels (found {0})")]
    TooFewLabels(usize),
    #[error("target weights have dimension {got}, spec says {want}")]
    TargetDimensionMismatch { got: usize, want: usize },
    #[error("noise level must be finite and nonnegative (got {0})")]
    BadNoise(f64),
    #[error("dimension must be positive")]
    ZeroDimension,
}

// ---------------------------------------------------------------------------
// LIBSVM text format
// ---------------------------------------------------------------------------

/// Errors from [`parse_libsvm`], each carrying the 1-based line number.
#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("line {line}: missing label")]
    MissingLabel { line: usize },
    #[error("line {line}: malformed label '{token}'")]
    MalformedLabel { line: usize, token: String },
    #[error("line {line}: non-finite label")]
    NonFiniteLabel { line: usize },
    #[error("line {line}: malformed feature token '{token}'")]
    MalformedToken { line: usize, token: String },
    #[error("line {line}: feature index must be ≥ 1")]
    ZeroIndex { line: usize },
    #[error("line {line}: duplicate feature index {index}")]
    DuplicateIndex { line: usize, index: u32 },
    #[error("line {line}: feature index {index} not increasing")]
    DecreasingIndex { line: usize, index: u32 },
    #[error("line {line}: non-finite feature value")]
    NonFiniteValue { line: usize },
}

/// Parses LIBSVM-format text: one `label idx:val idx:val …` record per
/// line, 1-based strictly increasing indices, `#` starting a comment, blank
/// lines ignored. A line holding only a label is a sample with an empty
/// feature vector.
pub fn parse_libsvm(text: &str) -> Result<Dataset, ParseError> {
    let mut samples = Vec::new();
    for (line_idx, raw) in text.lines().enumerate() {
        let line = line_idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();
        let label_token = match tokens.next() {
            Some(t) => t,
            None => continue, // blank or comment-only line
        };
        let label: f64 = label_token
            .parse()
            .map_err(|_| ParseError::MalformedLabel { line, token: label_token.to_string() })?;
        if !label.is_finite() {
            return Err(ParseError::NonFiniteLabel { line });
        }
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for token in tokens {
            let (idx_str, val_str) = token
                .split_once(':')
                .ok_or_else(|| ParseError::MalformedToken { line, token: token.to_string() })?;
            let index: u32 = idx_str
                .parse()
                .map_err(|_| ParseError::MalformedToken { line, token: token.to_string() })?;
            let value: f64 = val_str
                .parse()
                .map_err(|_| ParseError::MalformedToken { line, token: token.to_string() })?;
            if index == 0 {
                return Err(ParseError::ZeroIndex { line });
            }
            if let Some(&prev) = indices.last() {
                if index == prev {
                    return Err(ParseError::DuplicateIndex { line, index });
                }
                if index < prev {
                    return Err(ParseError::DecreasingIndex { line, index });
                }
            }
            if !value.is_finite() {
                return Err(ParseError::NonFiniteValue { line });
            }
            indices.push(index);
            values.push(value);
        }
        // Sample::new re-checks the invariants already enforced above.
        let sample = Sample::new(indices, values, label).map_err(|e| match e {
            SampleError::NonFiniteLabel => ParseError::NonFiniteLabel { line },
            _ => unreachable!("sample invariants checked during parsing"),
        })?;
        samples.push(sample);
    }
    Ok(Dataset::new(samples).expect("dataset construction is infallible"))
}

/// Serializes a dataset back to LIBSVM text.
///
/// Floats are written with Rust's shortest-round-trip formatting, so
/// `parse_libsvm(&to_libsvm_string(&d)) == d` exactly.
pub fn to_libsvm_string(data: &Dataset) -> String {
    let mut out = String::new();
    for z in data.samples() {
        write!(out, "{}", z.label()).expect("string write");
        for (&i, &v) in z.indices().iter().zip(z.values()) {
            write!(out, " {}:{}", i, v).expect("string write");
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

/// Prepares raw data for binary classification: binarizes labels and
/// normalizes features.
///
/// Labels: the distinct label values are sorted; the lower half maps to −1
/// and the upper half to +1, with an odd count placing the median value in
/// the lower half. Fewer than two distinct values is an error.
///
/// Features: every sample is scaled to unit ℓ2 norm; all-zero feature
/// vectors are left unchanged.
pub fn preprocess(data: &Dataset) -> Result<Dataset, DataError> {
    let mut distinct: Vec<f64> = data.samples().iter().map(Sample::label).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).expect("labels are finite"));
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(DataError::TooFewLabels(distinct.len()));
    }
    // Lower half (median inclusive when odd) → −1.
    let lower_count = distinct.len().div_ceil(2);
    let threshold = distinct[lower_count - 1]; // largest label mapping to −1
    let samples = data
        .samples()
        .iter()
        .map(|z| {
            let label = if z.label() <= threshold { -1.0 } else { 1.0 };
            let norm_sq = z.feature_norm_sq();
            if norm_sq > 0.0 {
                z.scaled(1.0 / norm_sq.sqrt()).with_label(label)
            } else {
                z.with_label(label)
            }
        })
        .collect();
    Dataset::new(samples)
}

/// Scales every sample to unit ℓ2 feature norm, leaving labels untouched
/// (all-zero feature vectors are kept as-is). The regression counterpart of
/// [`preprocess`]'s feature step: it pins the certified smoothness constant
/// without binarizing continuous targets.
pub fn scale_to_unit_norm(data: &Dataset) -> Dataset {
    let samples = data
        .samples()
        .iter()
        .map(|z| {
            let norm_sq = z.feature_norm_sq();
            if norm_sq > 0.0 {
                z.scaled(1.0 / norm_sq.sqrt())
            } else {
                z.clone()
            }
        })
        .collect();
    Dataset::new(samples).expect("scaling preserves sample validity")
}

// ---------------------------------------------------------------------------
// Splitting and neighboring datasets
// ---------------------------------------------------------------------------

/// Splits into (train, holdout) by a seeded shuffle: the permuted first
/// ⌊fraction·n⌋ samples become the training set.
pub fn split_train(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset), DataError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(DataError::BadFraction(fraction));
    }
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let train_len = (fraction * n as f64).floor() as usize;
    let train: Vec<Sample> = order[..train_len].iter().map(|&i| data.samples[i].clone()).collect();
    let holdout: Vec<Sample> = order[train_len..].iter().map(|&i| data.samples[i].clone()).collect();
    Ok((Dataset::new(train)?, Dataset::new(holdout)?))
}

/// A pair of datasets differing in exactly one position.
#[derive(Debug, Clone)]
pub struct NeighborPair {
    /// The original training set S.
    pub original: Dataset,
    /// S′: S with one example replaced.
    pub perturbed: Dataset,
    /// 1-based position of the replaced example.
    pub replaced_index: usize,
}

/// Builds a neighboring pair: a uniformly drawn position i ∈ {1,…,n} of
/// `train` is replaced by a uniformly drawn example from `pool`.
///
/// The two draws (position, then replacement) come from a fresh ChaCha
/// stream seeded with `seed`.
pub fn make_neighbor(train: &Dataset, pool: &Dataset, seed: u64) -> Result<NeighborPair, DataError> {
    if train.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    if pool.is_empty() {
        return Err(DataError::EmptyPool);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let replaced_index = rng.gen_range(1..=train.len());
    let replacement = pool.samples()[rng.gen_range(0..pool.len())].clone();
    Ok(NeighborPair {
        original: train.clone(),
        perturbed: train.with_replaced(replaced_index - 1, replacement),
        replaced_index,
    })
}

// ---------------------------------------------------------------------------
// Synthetic linear-model data
// ---------------------------------------------------------------------------

/// A linear regression model with standard Gaussian features:
/// x ~ N(0, I_d), y = ⟨w°, x⟩ + ε with ε ~ N(0, σ²).
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    dimension: usize,
    target: Weights,
    noise_sigma: f64,
    seed: u64,
}

impl SyntheticSpec {
    /// Validates d ≥ 1, `target.dim() == d`, σ finite and ≥ 0.
    pub fn new(dimension: usize, target: Weights, noise_sigma: f64, seed: u64) -> Result<Self, DataError> {
        if dimension == 0 {
            return Err(DataError::ZeroDimension);
        }
        if target.dim() != dimension {
            return Err(DataError::TargetDimensionMismatch { got: target.dim(), want: dimension });
        }
        if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
            return Err(DataError::BadNoise(noise_sigma));
        }
        Ok(SyntheticSpec { dimension, target, noise_sigma, seed })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// The generating weights w°.
    pub fn target(&self) -> &Weights {
        &self.target
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    /// Returns a copy with a different seed (fresh draw of the same model).
    pub fn with_seed(&self, seed: u64) -> SyntheticSpec {
        SyntheticSpec { seed, ..self.clone() }
    }
}

/// Draws `n` i.i.d. examples from the linear model. Feature vectors are
/// dense (every index 1..=d stored explicitly). Deterministic in
/// (spec, n), and a longer draw extends a shorter one sample-for-sample.
pub fn generate_synthetic(spec: &SyntheticSpec, n: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.dimension;
    let indices: Vec<u32> = (1..=d as u32).collect();
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let mut values = Vec::with_capacity(d);
        let mut dot = 0.0;
        for j in 0..d {
            let x: f64 = rng.sample(rand_distr::StandardNormal);
            dot += spec.target.0[j] * x;
            values.push(x);
        }
        let noise: f64 = rng.sample(rand_distr::StandardNormal);
        let label = dot + spec.noise_sigma * noise;
        samples.push(Sample::new(indices.clone(), values, label).expect("synthetic samples are finite"));
    }
    Dataset::new(samples).expect("dataset construction is infallible")
}

/// Exact population risk of the *unregularized* least-squares loss under
/// the synthetic model: E[½(⟨w,x⟩ − y)²] = ½(‖w − w°‖² + σ²).
///
/// (⟨w−w°, x⟩ and ε are independent zero-mean Gaussians, so the expected
/// squared residual is the sum of their variances.)
pub fn population_risk_ls(spec: &SyntheticSpec, w: &Weights) -> f64 {
    assert_eq!(w.dim(), spec.dimension, "weight dimension mismatch");
    0.5 * (w.dist_sq(&spec.target) + spec.noise_sigma * spec.noise_sigma)
}
