//! Low-dimensional solvers for the smoothed loss and for density evolution.
//!
//! The smoothed loss u(x, t) solves the viscous Hamilton-Jacobi equation
//!
//! ```text
//! u_t = −½|∇u|² + (β⁻¹/2) Δu,    u(x, 0) = f(x)
//! ```
//!
//! and is computed four ways: Cole-Hopf quadrature ([`cole_hopf`]), the
//! Hopf-Lax inf-convolution for β⁻¹ = 0 ([`hopf_lax`]), an explicit monotone
//! finite-difference scheme ([`fd`]) and, for comparison, plain heat-kernel
//! smoothing ([`heat`]). [`fokker_planck`] evolves densities under a gradient
//! drift and [`characteristics`] holds the one-dimensional Burgers and
//! convexity-interval tools.

pub mod characteristics;
pub mod cole_hopf;
pub mod fd;
pub mod fokker_planck;
pub mod grid;
pub mod heat;
pub mod hopf_lax;
mod quadrature;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::Objective;

pub use characteristics::{burgers_characteristic_check, convexity_interval, BurgersResult};
pub use cole_hopf::solve_viscous_hj_cole_hopf;
pub use fd::{solve_hj_monotone_fd, solve_hj_monotone_fd_from, solve_hjb_backward, HjbSolution};
pub use fokker_planck::evolve_fokker_planck;
pub use grid::{GridFunction, GridGeometry};
pub use heat::solve_heat;
pub use hopf_lax::{prox_point, solve_hj_hopf_lax, solve_hj_hopf_lax_brute_force, ProxResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ColeHopf,
    HopfLax,
    MonotoneFd,
    Heat,
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "cole_hopf" => Ok(Scheme::ColeHopf),
            "hopf_lax" => Ok(Scheme::HopfLax),
            "fd" | "monotone_fd" => Ok(Scheme::MonotoneFd),
            "heat" => Ok(Scheme::Heat),
            other => Err(Error::invalid(format!("unknown scheme `{other}`"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scheme::ColeHopf => "cole_hopf",
            Scheme::HopfLax => "hopf_lax",
            Scheme::MonotoneFd => "fd",
            Scheme::Heat => "heat",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Linear-extrapolation ghost cells (finite differences) or a padded
    /// quadrature box (convolutions).
    #[default]
    Extrapolating,
    /// The box is one period; its upper face is identified with the lower one.
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeSolveConfig {
    pub beta_inv: f64,
    pub t_final: f64,
    /// Time step for the finite-difference scheme; chosen from the stability limit when absent.
    pub dt: Option<f64>,
    pub scheme: Scheme,
    pub boundary: Boundary,
}

impl PdeSolveConfig {
    pub fn new(scheme: Scheme, beta_inv: f64, t_final: f64) -> Self {
        PdeSolveConfig {
            beta_inv,
            t_final,
            dt: None,
            scheme,
            boundary: Boundary::Extrapolating,
        }
    }
}

/// Solves for u(·, t_final) with the configured scheme.
pub fn solve(
    f: &dyn Objective,
    cfg: &PdeSolveConfig,
    geometry: &GridGeometry,
) -> Result<GridFunction> {
    crate::objective::check_dim(geometry.dim(), f.dim())?;
    match cfg.scheme {
        Scheme::ColeHopf => {
            solve_viscous_hj_cole_hopf(f, cfg.beta_inv, cfg.t_final, geometry, cfg.boundary)
        }
        Scheme::HopfLax => solve_hj_hopf_lax(f, cfg.t_final, geometry),
        Scheme::MonotoneFd => solve_hj_monotone_fd(f, cfg, geometry),
        Scheme::Heat => solve_heat(f, cfg.beta_inv, cfg.t_final, geometry, cfg.boundary),
    }
}
