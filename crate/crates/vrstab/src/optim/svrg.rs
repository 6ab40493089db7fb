//! Stepwise engine for the two-loop variance-reduced method.

use crate::data::Dataset;
use crate::losses::{empirical_gradient_into, loss_gradient_into, LossModel, Weights};
use crate::optim::{InitOption, OptimError};

/// One-step-at-a-time executor of the two-loop method.
///
/// The engine holds the inner iterate x, the round's reference point w and
/// its full gradient ∇L_S(w). The caller supplies every random choice
/// (inner indices and the reference-selection position), which is what lets
/// two engines on neighboring datasets share one index stream.
///
/// Memory stays O(d) beyond the dataset: the selected inner iterate is
/// snapshotted the moment it is produced, so no round history is kept.
///
/// Round protocol: [`begin_round`](Self::begin_round), exactly `m`
/// [`inner_step`](Self::inner_step) calls, then
/// [`end_round`](Self::end_round).
#[derive(Debug, Clone)]
pub struct SvrgEngine<'a> {
    model: &'a LossModel,
    data: &'a Dataset,
    step_size: f64,
    /// Current inner iterate x_k.
    x: Weights,
    /// Reference point of the current round.
    reference: Weights,
    /// Full gradient ∇L_S at the reference.
    full_gradient: Weights,
    /// Snapshot of the inner iterate at the selected position.
    selected: Option<Weights>,
    /// Round plan: (inner length m, 1-based selected position).
    plan: Option<(usize, usize)>,
    /// Inner steps taken in the current round.
    inner_count: usize,
    /// Completed rounds.
    rounds_done: usize,
    /// Running sum and count of pre-update inner iterates (for averaging).
    pre_update_sum: Weights,
    pre_update_count: u64,
    gradient_evals: u64,
    grad_buf: Weights,
    grad_buf_ref: Weights,
}

impl<'a> SvrgEngine<'a> {
    /// Starts at `init`, which becomes the first reference; computes its
    /// full gradient (n component evaluations).
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
        let mut full_gradient = Weights::zeros(d);
        empirical_gradient_into(model, &init, data, &mut full_gradient);
        Ok(SvrgEngine {
            model,
            data,
            step_size,
            x: init.clone(),
            reference: init,
            full_gradient,
            selected: None,
            plan: None,
            inner_count: 0,
            rounds_done: 0,
            pre_update_sum: Weights::zeros(d),
            pre_update_count: 0,
            gradient_evals: data.len() as u64,
            grad_buf: Weights::zeros(d),
            grad_buf_ref: Weights::zeros(d),
        })
    }

    /// Current inner iterate.
    pub fn iterate(&self) -> &Weights {
        &self.x
    }

    /// Current reference point.
    pub fn reference(&self) -> &Weights {
        &self.reference
    }

    /// Completed rounds.
    pub fn rounds_done(&self) -> usize {
        self.rounds_done
    }

    /// Component-gradient evaluations consumed so far.
    pub fn gradient_evals(&self) -> u64 {
        self.gradient_evals
    }

    /// Running mean of all pre-update inner iterates across rounds.
    ///
    /// # Panics
    /// If no inner step has run yet.
    pub fn average_iterate(&self) -> Weights {
        assert!(self.pre_update_count > 0, "no inner steps taken yet");
        let mut avg = Weights::zeros(self.pre_update_sum.dim());
        avg.add_scaled(1.0 / self.pre_update_count as f64, &self.pre_update_sum);
        avg
    }

    /// Opens a round of `m` inner steps whose iterate at 1-based position
    /// `selection` will become the next reference.
    ///
    /// # Panics
    /// If a round is already open or `selection ∉ 1..=m`.
    pub fn begin_round(&mut self, m: usize, selection: usize) {
        assert!(self.plan.is_none(), "previous round not closed");
        assert!(m >= 1, "inner length must be at least 1");
        assert!((1..=m).contains(&selection), "selection {selection} outside 1..={m}");
        self.plan = Some((m, selection));
        self.inner_count = 0;
        self.selected = None;
    }

    /// One inner update with the 1-based example `index`:
    /// x ← x − η·(∇ℓ(x;z_i) − ∇ℓ(w;z_i) + ∇L_S(w)). Two component
    /// evaluations.
    ///
    /// # Panics
    /// If no round is open, the round is already complete, or `index` is
    /// out of range.
    pub fn inner_step(&mut self, index: usize) -> Result<(), OptimError> {
        let (m, selection) = self.plan.expect("no round open");
        assert!(self.inner_count < m, "round already has {m} steps");
        let z = &self.data.samples()[index - 1];

        self.pre_update_count += 1;
        self.pre_update_sum.add_scaled(1.0, &self.x);

        loss_gradient_into(self.model, &self.x, z, &mut self.grad_buf);
        loss_gradient_into(self.model, &self.reference, z, &mut self.grad_buf_ref);
        self.gradient_evals += 2;
        let eta = self.step_size;
        self.x.add_scaled(-eta, &self.grad_buf);
        self.x.add_scaled(eta, &self.grad_buf_ref);
        self.x.add_scaled(-eta, &self.full_gradient);

        self.inner_count += 1;
        if !self.x.is_finite() {
            return Err(OptimError::DivergedInner {
                round: self.rounds_done + 1,
                step: self.inner_count,
            });
        }
        if self.inner_count == selection {
            self.selected = Some(self.x.clone());
        }
        Ok(())
    }

    /// Closes the round: the snapshotted iterate becomes the new reference,
    /// its full gradient is computed (n evaluations), and the inner iterate
    /// continues or restarts per `option`.
    ///
    /// # Panics
    /// If the round is not exactly complete.
    pub fn end_round(&mut self, option: InitOption) {
        let (m, _) = self.plan.expect("no round open");
        assert_eq!(self.inner_count, m, "round closed after {} of {m} steps", self.inner_count);
        self.reference = self.selected.take().expect("selection was snapshotted");
        empirical_gradient_into(self.model, &self.reference, self.data, &mut self.full_gradient);
        self.gradient_evals += self.data.len() as u64;
        if option == InitOption::Reference {
            self.x = self.reference.clone();
        }
        self.plan = None;
        self.rounds_done += 1;
    }

    /// The update direction the engine would use for `index`, without
    /// changing any state: ∇ℓ(x;z_i) − ∇ℓ(w;z_i) + ∇L_S(w).
    pub fn probe_direction(&self, index: usize) -> Weights {
        let z = &self.data.samples()[index - 1];
        let mut g = Weights::zeros(self.x.dim());
        let mut g_ref = Weights::zeros(self.x.dim());
        loss_gradient_into(self.model, &self.x, z, &mut g);
        loss_gradient_into(self.model, &self.reference, z, &mut g_ref);
        g.add_scaled(-1.0, &g_ref);
        g.add_scaled(1.0, &self.full_gradient);
        g
    }
}
