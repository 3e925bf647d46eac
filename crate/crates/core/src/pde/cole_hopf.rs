//! Viscous Hamilton-Jacobi solutions through the Cole-Hopf transform.
//!
//! With v = exp(−βu) the viscous equation becomes the heat equation
//! v_t = (β⁻¹/2)Δv, so
//!
//! ```text
//! u(x, t) = −β⁻¹ log ∫ G_{β⁻¹t}(x − y) exp(−β f(y)) dy
//! ```
//!
//! where G_s is the Gaussian of variance s. The integral is evaluated in the
//! log domain.

use rayon::prelude::*;

use super::grid::{GridFunction, GridGeometry};
use super::quadrature::{gaussian_convolve, tabulate, Accumulate, Lattice};
use super::{hopf_lax, Boundary};
use crate::error::{Error, Result};
use crate::objective::{check_dim, norm, Objective};

/// Largest |∇f| over the grid nodes.
pub(crate) fn max_gradient_norm(f: &dyn Objective, geometry: &GridGeometry) -> f64 {
    (0..geometry.len())
        .into_par_iter()
        .map(|flat| norm(&f.gradient_vec(&geometry.point(flat))))
        .reduce(|| 0.0, f64::max)
}

/// Quadrature lattices for a Gaussian of variance `sigma2`. `drift_reach` is
/// how far the integrand's peak can sit from the target.
pub(crate) fn lattices(
    geometry: &GridGeometry,
    sigma2: f64,
    drift_reach: f64,
    boundary: Boundary,
) -> Result<Vec<Lattice>> {
    let sigma = sigma2.sqrt();
    let periodic = boundary == Boundary::Periodic;
    for k in 0..geometry.dim() {
        let width = geometry.upper[k] - geometry.lower[k];
        if !periodic && sigma >= width {
            return Err(Error::BoundaryTruncation {
                width: sigma,
                box_width: width,
            });
        }
    }
    let radius = 8.0 * sigma + drift_reach;
    Ok((0..geometry.dim())
        .map(|k| Lattice::new(geometry, k, sigma2, radius, periodic))
        .collect())
}

/// u(·, t) for u_t = −½|∇u|² + (β⁻¹/2)Δu with u(·, 0) = f.
///
/// `beta_inv = 0` is delegated to the Hopf-Lax formula. With
/// [`Boundary::Periodic`] the box is treated as one period of f.
pub fn solve_viscous_hj_cole_hopf(
    f: &dyn Objective,
    beta_inv: f64,
    t: f64,
    geometry: &GridGeometry,
    boundary: Boundary,
) -> Result<GridFunction> {
    check_dim(geometry.dim(), f.dim())?;
    if !(beta_inv >= 0.0) || !beta_inv.is_finite() {
        return Err(Error::invalid(format!(
            "beta_inv must be non-negative, got {beta_inv}"
        )));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("t must be non-negative, got {t}")));
    }
    if t == 0.0 {
        return GridFunction::sample(f, geometry);
    }
    if beta_inv == 0.0 {
        return hopf_lax::solve_hj_hopf_lax(f, t, geometry);
    }
    let beta = 1.0 / beta_inv;
    let sigma2 = beta_inv * t;
    // The integrand peaks near the proximal point, at most t·|∇f| away.
    let reach = 2.5 * t * max_gradient_norm(f, geometry);
    let lats = lattices(geometry, sigma2, reach, boundary)?;
    let g = tabulate(&lats, |y| -beta * f.value(y));
    let log_v = gaussian_convolve(&lats, &g, Accumulate::LogSumExp);
    let values: Vec<f64> = log_v.iter().map(|lv| -beta_inv * lv).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NotFinite(format!("Cole-Hopf value at node {i}")));
    }
    GridFunction::new(geometry.clone(), values)
}
