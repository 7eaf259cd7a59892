//! Simulation and verification toolkit for one-dimensional Kac-type kinetic
//! equations whose collision gain operator is an N-linear smoothing
//! transformation.
//!
//! The crate is organised around the objects the solution is built from:
//!
//! - [`kernel`]: laws of the weight vector `A = (A_1, ..., A_N)`, the
//!   standing admissibility conditions and the spectral function.
//! - [`trees`]: random N-ary recursive trees with multiplicative leaf weights.
//! - [`initial`]: initial data, their stable-attraction classification and
//!   stable samplers.
//! - [`montecarlo`]: exact-in-law samples of `V_t` and of the self-similar
//!   limit `V_inf`.
//! - [`wild`]: truncated Wild-series evaluation of the characteristic function.
//! - [`fixedpoint`]: population dynamics for the mixing measure of the
//!   self-similar profile, with exact moment oracles.
//! - [`metrics`]: empirical characteristic functions, KS and Wasserstein
//!   distances, decay-rate fitting.
//! - [`io`]: CSV/JSON persistence of batches and results.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fixedpoint;
pub mod initial;
pub mod io;
pub mod kernel;
pub mod metrics;
pub mod montecarlo;
pub mod rng;
pub mod special;
pub mod trees;
pub mod wild;

pub use error::{Error, Result};
pub use fixedpoint::{FixedPointConfig, MixingLaw, UpdateForm};
pub use initial::{HCase, HGammaProfile, InitialLaw};
pub use kernel::{KernelLaw, KernelSpec, Marginal};
pub use montecarlo::{SampleBatch, TimeMark};
pub use trees::{WeightStats, WeightedTree};
