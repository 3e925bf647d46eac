//! Density evolution under three drifts on a rugged 1D landscape: plain
//! gradient descent, the Hopf-Lax smoothed gradient and the viscous
//! (local-entropy) gradient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{check_dim, lookup_entry, ObjectiveRef};
use crate::pde::{
    evolve_fokker_planck, solve_hj_hopf_lax, solve_viscous_hj_cole_hopf, Boundary, GridFunction,
    GridGeometry,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Figure1Config {
    pub objective: String,
    /// Smoothing time of both HJ solutions.
    pub gamma: f64,
    /// Viscosity of the smoothed loss.
    pub beta_inv: f64,
    /// Diffusion of the density evolution.
    pub beta_inv_fp: f64,
    pub t_final: f64,
    pub grid_points: usize,
    /// Standard deviation of the Gaussian initial density, centred on the box.
    pub initial_sd: f64,
    /// Half-width of the target window around the global minimum, as a fraction of the box.
    pub window: f64,
}

impl Default for Figure1Config {
    fn default() -> Self {
        Figure1Config {
            objective: "rugged_s7_m5".into(),
            gamma: 0.25,
            beta_inv: 0.1,
            beta_inv_fp: 0.05,
            t_final: 3.0,
            grid_points: 801,
            initial_sd: 1.0,
            window: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure1Result {
    pub x_star: f64,
    pub mass_viscous: f64,
    pub mass_hopf_lax: f64,
    pub mass_sgd: f64,
    /// Viscous ≥ Hopf-Lax ≥ SGD with gaps of at least `min_gap`.
    pub ordered: bool,
    pub min_gap: f64,
    pub initial: GridFunction,
    pub viscous: GridFunction,
    pub hopf_lax: GridFunction,
    pub sgd: GridFunction,
}

/// Mass of `rho` within `radius` of `center`, by trapezoid weights.
pub fn window_mass(rho: &GridFunction, center: f64, radius: f64) -> f64 {
    let g = &rho.geometry;
    let h = g.spacing(0);
    let n = g.n_points[0];
    (0..n)
        .filter(|&i| (g.coord(0, i) - center).abs() <= radius)
        .map(|i| {
            if i == 0 || i + 1 == n {
                0.5 * h * rho.values[i]
            } else {
                h * rho.values[i]
            }
        })
        .sum()
}

fn global_minimum(f: &ObjectiveRef, name: &str) -> Result<f64> {
    let entry = lookup_entry(name)?;
    entry
        .known_minima
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|m| m.0[0])
        .ok_or_else(|| Error::invalid(format!("no known minima for {}", f.name())))
}

pub const DEFAULT_MIN_GAP: f64 = 0.02;

pub fn reproduce_figure1(cfg: &Figure1Config) -> Result<Figure1Result> {
    let entry = lookup_entry(&cfg.objective)?;
    let f = entry.objective.clone();
    check_dim(1, f.dim())?;
    let (lo, hi) = entry
        .domain_box
        .clone()
        .ok_or_else(|| Error::invalid("objective has no box"))?;
    let geometry = GridGeometry::uniform_1d(lo[0], hi[0], cfg.grid_points)?;
    let x_star = global_minimum(&f, &cfg.objective)?;
    let center = 0.5 * (lo[0] + hi[0]);
    let sd = cfg.initial_sd;
    let initial =
        GridFunction::from_fn(&geometry, |x| (-0.5 * ((x[0] - center) / sd).powi(2)).exp())
            .normalized()?;

    let viscous_u = solve_viscous_hj_cole_hopf(
        f.as_ref(),
        cfg.beta_inv,
        cfg.gamma,
        &geometry,
        Boundary::Extrapolating,
    )?;
    let hopf_lax_u = solve_hj_hopf_lax(f.as_ref(), cfg.gamma, &geometry)?;
    let raw = GridFunction::sample(f.as_ref(), &geometry)?;
    let drift_of = |u: &GridFunction| -> Vec<GridFunction> {
        // Exact gradient for the raw loss, centred differences for the smoothed ones.
        if std::ptr::eq(u, &raw) {
            vec![GridFunction::from_fn(&geometry, |x| f.gradient_vec(x)[0])]
        } else {
            u.gradient()
        }
    };
    let evolve = |u: &GridFunction| {
        evolve_fokker_planck(&drift_of(u), &initial, cfg.beta_inv_fp, cfg.t_final, None)
    };
    let viscous = evolve(&viscous_u)?;
    let hopf_lax = evolve(&hopf_lax_u)?;
    let sgd = evolve(&raw)?;

    let radius = cfg.window * (hi[0] - lo[0]);
    let mass_viscous = window_mass(&viscous, x_star, radius);
    let mass_hopf_lax = window_mass(&hopf_lax, x_star, radius);
    let mass_sgd = window_mass(&sgd, x_star, radius);
    let min_gap = DEFAULT_MIN_GAP;
    let ordered = mass_viscous - mass_hopf_lax >= min_gap && mass_hopf_lax - mass_sgd >= min_gap;
    Ok(Figure1Result {
        x_star,
        mass_viscous,
        mass_hopf_lax,
        mass_sgd,
        ordered,
        min_gap,
        initial,
        viscous,
        hopf_lax,
        sgd,
    })
}
