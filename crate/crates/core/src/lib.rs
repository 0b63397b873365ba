//! Weakly-controlled gradient flows for point estimation.
//!
//! A model parameter evolves under the gradient flow of a training loss plus a
//! small control term `eps * u(t) * B(theta)`, where `B` is the elementwise
//! square of the gradient on a dithered copy of the training data. The control
//! is chosen to minimise the validation loss at the final time. Instead of
//! solving the coupled optimality system, the crate follows the regular
//! perturbation route:
//!
//! 1. integrate the zeroth-order gradient flow forward and its adjoint backward,
//! 2. pick the bang-bang control that maximises the Hamiltonian pointwise,
//! 3. integrate the first-order correction forward,
//! 4. aggregate `theta* = theta0(T) + eps * theta1(T)`.
//!
//! Modules map onto those stages: [`dataset`] (data, splits, dithering,
//! standardisation), [`model`] (losses and derivatives), [`flow`] (fixed-step
//! RK4 for the decomposed systems), [`control`] (Hamiltonian and switching),
//! [`perturb`] (the algorithm, diagnostics, epsilon sweeps) and
//! [`experiment`] (configured runs, manifests, tables, plot data).

pub mod control;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod flow;
pub mod model;
pub mod perturb;

pub use control::{ControlSet, SwitchRecord};
pub use dataset::{Dataset, Label, NoiseSpec, SamplePair, SplitMode, SplitSpec, Standardizer, WaterProperty};
pub use error::{Error, Result};
pub use flow::{AdjointMode, TimeGrid, Trajectory};
pub use model::{ParamVector, PolynomialModel};
pub use perturb::{PerturbationResult, Problem, SweepResult};
