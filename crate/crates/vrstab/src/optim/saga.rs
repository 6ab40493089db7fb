//! Stepwise engine for the table-based variance-reduced method.

use crate::data::Dataset;
use crate::losses::{loss_gradient_into, LossModel, Weights};
use crate::optim::{OptimError, SingleLoopEngine};

/// One-step-at-a-time executor of the table-based method.
///
/// The engine keeps one stored gradient per example plus their mean. A step
/// with example i evaluates one fresh component gradient g_i = ∇ℓ(w;z_i),
/// moves along g_i − table[i] + mean(table), then refreshes table[i] ← g_i
/// and updates the mean incrementally — O(d) work per step after the O(n·d)
/// table initialization.
///
/// The table is initialized with the per-example gradients at the starting
/// point, so the very first step is exactly a full-gradient step.
#[derive(Debug, Clone)]
pub struct SagaEngine<'a> {
    model: &'a LossModel,
    data: &'a Dataset,
    step_size: f64,
    w: Weights,
    /// Stored gradient per example (indexed 0-based).
    table: Vec<Weights>,
    /// Mean of the table rows, maintained incrementally.
    table_mean: Weights,
    steps_done: usize,
    pre_update_sum: Weights,
    pre_update_count: u64,
    gradient_evals: u64,
    grad_buf: Weights,
}

impl<'a> SagaEngine<'a> {
    /// Starts at `init` and fills the gradient table there
    /// (n component evaluations).
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
        let n = data.len();
        let mut table = Vec::with_capacity(n);
        let mut table_mean = Weights::zeros(d);
        let mut buf = Weights::zeros(d);
        for z in data.samples() {
            loss_gradient_into(model, &init, z, &mut buf);
            table_mean.add_scaled(1.0 / n as f64, &buf);
            table.push(buf.clone());
        }
        Ok(SagaEngine {
            model,
            data,
            step_size,
            w: init,
            table,
            table_mean,
            steps_done: 0,
            pre_update_sum: Weights::zeros(d),
            pre_update_count: 0,
            gradient_evals: n as u64,
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

    /// One step with the 1-based example `index` (one fresh component
    /// evaluation plus O(d) table bookkeeping).
    pub fn step(&mut self, index: usize) -> Result<(), OptimError> {
        let z = &self.data.samples()[index - 1];
        let d = self.w.dim();
        let n = self.data.len();

        self.pre_update_count += 1;
        self.pre_update_sum.add_scaled(1.0, &self.w);

        loss_gradient_into(self.model, &self.w, z, &mut self.grad_buf);
        self.gradient_evals += 1;

        let eta = self.step_size;
        let stored = &self.table[index - 1];
        for j in 0..d {
            let g = self.grad_buf.0[j] - stored.0[j] + self.table_mean.0[j];
            self.w.0[j] -= eta * g;
        }
        let inv_n = 1.0 / n as f64;
        let stored = &mut self.table[index - 1];
        for j in 0..d {
            self.table_mean.0[j] += (self.grad_buf.0[j] - stored.0[j]) * inv_n;
            stored.0[j] = self.grad_buf.0[j];
        }

        self.steps_done += 1;
        if !self.w.is_finite() {
            return Err(OptimError::DivergedStep { step: self.steps_done });
        }
        Ok(())
    }

    /// The update direction the engine would use for `index`, without
    /// changing any state: ∇ℓ(w;z_i) − table[i] + mean(table).
    pub fn probe_direction(&self, index: usize) -> Weights {
        let z = &self.data.samples()[index - 1];
        let mut g = Weights::zeros(self.w.dim());
        loss_gradient_into(self.model, &self.w, z, &mut g);
        g.add_scaled(-1.0, &self.table[index - 1]);
        g.add_scaled(1.0, &self.table_mean);
        g
    }

    /// The stored per-example gradients, 0-based (row j belongs to the
    /// 1-based example j+1). Read-only view for coupled-potential
    /// diagnostics.
    pub fn stored_gradients(&self) -> &[Weights] {
        &self.table
    }

    /// The exact mean of the table rows, recomputed from scratch
    /// (diagnostic for the incremental mean's drift).
    pub fn recomputed_table_mean(&self) -> Weights {
        let mut mean = Weights::zeros(self.w.dim());
        for row in &self.table {
            mean.add_scaled(1.0 / self.table.len() as f64, row);
        }
        mean
    }
}

impl SingleLoopEngine for SagaEngine<'_> {
    fn step(&mut self, index: usize) -> Result<(), OptimError> {
        SagaEngine::step(self, index)
    }

    fn iterate(&self) -> &Weights {
        SagaEngine::iterate(self)
    }

    fn average_iterate(&self) -> Weights {
        SagaEngine::average_iterate(self)
    }

    fn gradient_evals(&self) -> u64 {
        SagaEngine::gradient_evals(self)
    }
}
