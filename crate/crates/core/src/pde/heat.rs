//! Heat-kernel smoothing v(·, t) = G_{β⁻¹t} * f, the solution of v_t = (β⁻¹/2)Δv.

use super::cole_hopf::lattices;
use super::grid::{GridFunction, GridGeometry};
use super::quadrature::{gaussian_convolve, tabulate, Accumulate};
use super::Boundary;
use crate::error::{Error, Result};
use crate::objective::{check_dim, Objective};

pub fn solve_heat(
    f: &dyn Objective,
    beta_inv: f64,
    t: f64,
    geometry: &GridGeometry,
    boundary: Boundary,
) -> Result<GridFunction> {
    check_dim(geometry.dim(), f.dim())?;
    if !(beta_inv > 0.0) || !beta_inv.is_finite() {
        return Err(Error::invalid(format!(
            "heat smoothing needs beta_inv > 0, got {beta_inv}"
        )));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("t must be non-negative, got {t}")));
    }
    if t == 0.0 {
        return GridFunction::sample(f, geometry);
    }
    let lats = lattices(geometry, beta_inv * t, 0.0, boundary)?;
    let g = tabulate(&lats, |y| f.value(y));
    let values = gaussian_convolve(&lats, &g, Accumulate::Linear);
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NotFinite(format!("heat value at node {i}")));
    }
    GridFunction::new(geometry.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{make_quadratic, Affine, SineWave};

    #[test]
    fn affine_slope_is_preserved() {
        let f = Affine {
            slope: vec![3.0],
            offset: 0.0,
        };
        let g = GridGeometry::uniform_1d(-2.0, 2.0, 101).unwrap();
        let v = solve_heat(&f, 0.5, 1.0, &g, Boundary::Extrapolating).unwrap();
        let dv = v.derivative(0);
        assert!(dv.values.iter().all(|d| (d - 3.0).abs() < 1e-10));
    }

    #[test]
    fn quadratic_gains_half_the_variance() {
        let f = make_quadratic(1.0, vec![], 1).unwrap();
        let g = GridGeometry::uniform_1d(-3.0, 3.0, 121).unwrap();
        let (bi, t) = (0.3, 0.7);
        let v = solve_heat(&f, bi, t, &g, Boundary::Extrapolating).unwrap();
        for (i, val) in v.values.iter().enumerate() {
            let x = g.coord(0, i);
            assert!((val - (x * x / 2.0 + bi * t / 2.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn sine_decays_on_periodic_box() {
        let f = SineWave { k: 1.0 };
        let g = GridGeometry::uniform_1d(0.0, 2.0 * std::f64::consts::PI, 129).unwrap();
        let (bi, t) = (0.4, 1.5);
        let v = solve_heat(&f, bi, t, &g, Boundary::Periodic).unwrap();
        let decay = (-bi * t / 2.0).exp();
        for (i, val) in v.values.iter().enumerate() {
            assert!((val - decay * g.coord(0, i).sin()).abs() < 1e-6);
        }
    }
}
