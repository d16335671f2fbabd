//! Logarithmic derivatives of determinantal point processes on ℝ with
//! integrable projection kernels, verified by Monte Carlo.
//!
//! The pipeline: a [`kernels::KernelModel`] is reduced to Palm kernels
//! ([`palm`]), discretized and sampled exactly ([`sampler`]); additive
//! and multiplicative functionals ([`functionals`]) build the regularized
//! log-derivative and the Radon–Nikodym factor ([`logderiv`]), which in
//! turn drives a finite-N interacting diffusion ([`dynamics`]).

// `!(x > 0.0)` style checks are there to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod dynamics;
pub mod error;
pub mod estimate;
pub mod exec;
pub mod functionals;
pub mod kernels;
pub mod logderiv;
pub mod palm;
pub mod quadrature;
pub mod sampler;

pub use error::{Error, Result};
pub use estimate::Estimate;
pub use exec::Exec;
pub use kernels::{Kernel, KernelModel, KernelSpec, Window};
pub use palm::PalmKernel;
pub use sampler::Configuration;
