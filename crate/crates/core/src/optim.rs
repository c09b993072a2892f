//! Adam with bias correction and an optional step-decay schedule.

use serde::{Deserialize, Serialize};

use crate::autodiff::ParamGradient;
use crate::error::{Error, Result};
use crate::network::CompositeModel;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// Multiply the rate by `factor` once every `every` steps.
    StepDecay {
        factor: f64,
        every: usize,
    },
}

impl LrSchedule {
    /// Rate used for the update at zero-based `epoch`.
    pub fn effective_lr(&self, base: f64, epoch: usize) -> f64 {
        match *self {
            LrSchedule::Constant => base,
            LrSchedule::StepDecay { factor, every } => base * factor.powi((epoch / every.max(1)) as i32),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LrSchedule::Constant => Ok(()),
            LrSchedule::StepDecay { factor, every } if factor > 0.0 && factor <= 1.0 && every > 0 => Ok(()),
            LrSchedule::StepDecay { .. } => {
                Err(Error::config("step decay needs a factor in (0, 1] and a positive interval"))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step_count: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_hat: f64,
    pub lr: f64,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> Self {
        AdamState {
            step_count: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            beta1: 0.9,
            beta2: 0.999,
            eps_hat: 1e-8,
            lr,
        }
    }

    pub fn for_model(model: &CompositeModel, lr: f64) -> Self {
        Self::new(model.n_params(), lr)
    }

    /// One update of `params` in place. A non-finite gradient entry leaves
    /// everything untouched and reports divergence at `epoch`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], epoch: usize) -> Result<()> {
        assert_eq!(params.len(), self.m.len(), "parameter count changed");
        assert_eq!(grad.len(), self.m.len(), "gradient length mismatch");
        if let Some(&bad) = grad.iter().find(|g| !g.is_finite()) {
            return Err(Error::Divergence { epoch, value: bad, last_finite_loss: None });
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps_hat);
        }
        Ok(())
    }

    /// Applies a gradient laid out like [`ParamGradient`] to every subnetwork.
    pub fn step_model(&mut self, model: &mut CompositeModel, grad: &ParamGradient, epoch: usize) -> Result<()> {
        if grad.nets.len() != model.n_nets() {
            return Err(Error::config("gradient does not match the model"));
        }
        let mut params: Vec<f64> = model.nets().flat_map(|n| n.params().iter().copied()).collect();
        let flat: Vec<f64> = grad.iter().copied().collect();
        if flat.len() != params.len() {
            return Err(Error::config("gradient does not match the model"));
        }
        self.step(&mut params, &flat, epoch)?;
        let mut rest = params.as_slice();
        for net in model.nets_mut() {
            let (head, tail) = rest.split_at(net.n_params());
            net.params_mut().copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }
}

/// Stateless form of [`AdamState::step`].
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64], epoch: usize) -> Result<()> {
    state.step(params, grad, epoch)
}
