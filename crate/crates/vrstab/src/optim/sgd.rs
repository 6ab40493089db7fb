//! Stepwise engine for plain stochastic gradient descent.

use crate::data::Dataset;
use crate::losses::{loss_gradient_into, LossModel, Weights};
use crate::optim::{OptimError, SingleLoopEngine};

/// One-step-at-a-time executor of plain stochastic gradient descent:
/// w ← w − η·∇ℓ(w; z_i). The baseline against which the variance-reduced
/// engines are compared; it shares their calling convention so coupled
/// stability measurements treat all three uniformly.
#[derive(Debug, Clone)]
pub struct SgdEngine<'a> {
    model: &'a LossModel,
    data: &'a Dataset,
    step_size: f64,
    w: Weights,
    steps_done: usize,
    pre_update_sum: Weights,
    pre_update_count: u64,
    gradient_evals: u64,
    grad_buf: Weights,
}

impl<'a> SgdEngine<'a> {
    pub fn new(
        model: &'a LossModel,
        data: &'a Dataset,
        step_size: f64,
        init: Weights,
    ) -> Result<Self, OptimError> {
        if !(step_size.is_finite() && step_size > 0.0) {
            return Err(OptimError::BadStepSize);
        }
        if data.is_empty() {
            return Err(OptimError::EmptyDataset);
        }
        let d = init.dim();
        Ok(SgdEngine {
            model,
            data,
            step_size,
            w: init,
            steps_done: 0,
            pre_update_sum: Weights::zeros(d),
            pre_update_count: 0,
            gradient_evals: 0,
            grad_buf: Weights::zeros(d),
        })
    }

    /// Current iterate.
    pub fn iterate(&self) -> &Weights {
        &self.w
    }

    /// Steps taken so far.
    pub fn steps_done(&self) -> usize {
        self.steps_done
    }

    /// One step with the 1-based example `index` (one component
    /// evaluation).
    pub fn step(&mut self, index: usize) -> Result<(), OptimError> {
        let z = &self.data.samples()[index - 1];
        self.pre_update_count += 1;
        self.pre_update_sum.add_scaled(1.0, &self.w);
        loss_gradient_into(self.model, &self.w, z, &mut self.grad_buf);
        self.gradient_evals += 1;
        self.w.add_scaled(-self.step_size, &self.grad_buf);
        self.steps_done += 1;
        if !self.w.is_finite() {
            return Err(OptimError::DivergedStep { step: self.steps_done });
        }
        Ok(())
    }

    /// The update direction for `index` without changing state: the plain
    /// stochastic gradient ∇ℓ(w; z_i).
    pub fn probe_direction(&self, index: usize) -> Weights {
        let z = &self.data.samples()[index - 1];
        let mut g = Weights::zeros(self.w.dim());
        loss_gradient_into(self.model, &self.w, z, &mut g);
        g
    }

    /// Running mean of pre-update iterates.
    ///
    /// # Panics
    /// If no step has run yet.
    pub fn average_iterate(&self) -> Weights {
        assert!(self.pre_update_count > 0, "no steps taken yet");
        let mut avg = Weights::zeros(self.pre_update_sum.dim());
        avg.add_scaled(1.0 / self.pre_update_count as f64, &self.pre_update_sum);
        avg
    }

    /// Component-gradient evaluations consumed so far.
    pub fn gradient_evals(&self) -> u64 {
        self.gradient_evals
    }
}

impl SingleLoopEngine for SgdEngine<'_> {
    fn step(&mut self, index: usize) -> Result<(), OptimError> {
        SgdEngine::step(self, index)
    }

    fn iterate(&self) -> &Weights {
        SgdEngine::iterate(self)
    }

    fn average_iterate(&self) -> Weights {
        SgdEngine::average_iterate(self)
    }

    fn gradient_evals(&self) -> u64 {
        SgdEngine::gradient_evals(self)
    }
}
