//! Smoothed stochastic gradient descent and a small PDE laboratory.
//!
//! The crate is organised around five pieces:
//!
//! * [`objective`]: loss functions with exact gradients, stochastic gradients
//!   and (in low dimension) Hessians, plus a named corpus of test problems.
//! * [`pde`]: grid solvers for the viscous and inviscid Hamilton-Jacobi
//!   equations, the heat equation and the Fokker-Planck equation.
//! * [`optim`]: SGD, Entropy-SGD, HJ, heat smoothing and Elastic-SGD as
//!   discrete update rules, with momentum and the γ scoping schedule.
//! * [`analysis`]: numerical checks of homogenization, invariant measures,
//!   the control improvement inequality, semiconcavity and spectral bounds.
//! * [`harness`]: configuration parsing, experiment runners, CSV/JSON/SVG output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod error;
pub mod harness;
pub mod objective;
pub mod optim;
pub mod pde;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use objective::{Objective, ObjectiveRef};
pub use pde::grid::{GridFunction, GridGeometry};
