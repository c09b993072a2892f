//! Composite physics-informed neural networks (C-PINNs) for singularly
//! perturbed boundary-value problems.
//!
//! A C-PINN approximates each solution component as a smooth outer network
//! plus inner networks localized to boundary layers by clamped exponential
//! blend factors `exp(-p(x)/delta)`. Training minimizes the mean squared PDE
//! residual on collocation points plus the boundary mismatch.
//!
//! The crate is organized bottom-up:
//!
//! - [`autodiff`]: second-order input jets through dense tanh layers, a scalar
//!   reverse tape for loss assembly, and exact parameter gradients.
//! - [`network`]: MLPs, Xavier initialization, blend descriptors, composite
//!   models and their checkpoint format.
//! - [`sampling`]: collocation, boundary and evaluation point sets.
//! - [`problems`]: the six benchmark problems with analytic solutions.
//! - [`loss`]: residual, boundary and soft-weighted loss terms.
//! - [`optim`]: Adam with an optional step-decay schedule.
//! - [`trainer`]: the training loop and evaluation metrics.
//! - [`cli`]: the `splayer` command-line front end and output writers.

pub mod autodiff;
pub mod cli;
pub mod error;
pub mod loss;
pub mod network;
pub mod optim;
pub mod problems;
pub mod sampling;
pub mod trainer;

pub use error::{Error, Result};
