//! Density evolution ρ_t = ∇·(b ρ) + (β⁻¹/2)Δρ for a static drift field b.
//!
//! Conservative upwind finite volumes with zero-flux walls. Node i owns the
//! trapezoid cell of width h (h/2 at the walls), so the trapezoidal mass is
//! conserved exactly up to rounding. The stationary density for b = ∇f is
//! proportional to exp(−2βf).

use rayon::prelude::*;

use super::grid::GridFunction;
use crate::error::{Error, Result};

const NEGATIVE_TOLERANCE: f64 = -1e-12;

/// Evolves `rho0` to time `t_final` under drift `drift` (one grid function per axis).
///
/// `dt = None` picks 90% of the positivity limit
/// 1 / Σ_k (2 max|b_k|/h_k + β⁻¹/h_k²).
pub fn evolve_fokker_planck(
    drift: &[GridFunction],
    rho0: &GridFunction,
    beta_inv: f64,
    t_final: f64,
    dt: Option<f64>,
) -> Result<GridFunction> {
    let g = &rho0.geometry;
    let dim = g.dim();
    if drift.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: drift.len(),
        });
    }
    if drift.iter().any(|d| d.geometry != *g) {
        return Err(Error::invalid("drift and density must share a grid"));
    }
    if !(beta_inv >= 0.0) || !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(Error::invalid(
            "Fokker-Planck needs beta_inv ≥ 0 and a finite t_final ≥ 0",
        ));
    }
    if let Some((i, v)) = rho0
        .values
        .iter()
        .enumerate()
        .find(|(_, v)| **v < NEGATIVE_TOLERANCE || !v.is_finite())
    {
        return Err(Error::NegativeDensity {
            index: i,
            value: *v,
        });
    }
    if t_final == 0.0 {
        return Ok(rho0.clone());
    }
    let diff = 0.5 * beta_inv;
    let rate: f64 = (0..dim)
        .map(|k| {
            let h = g.spacing(k);
            let vmax = drift[k].values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            2.0 * vmax / h + beta_inv / (h * h)
        })
        .sum();
    let limit = if rate > 0.0 {
        1.0 / rate
    } else {
        f64::INFINITY
    };
    let dt = match dt {
        Some(dt) if !(dt > 0.0) => {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")))
        }
        Some(dt) if dt > limit => return Err(Error::Cfl { dt, limit }),
        Some(dt) => dt,
        None => 0.9 * limit,
    };
    let steps = (t_final / dt - 1e-9).ceil().max(1.0) as usize;
    let dt = t_final / steps as f64;

    let cell = |k: usize, i: usize| {
        let h = g.spacing(k);
        if i == 0 || i + 1 == g.n_points[k] {
            0.5 * h
        } else {
            h
        }
    };
    // Flux from node `a` to its right neighbour `a + s` along axis k.
    let face_flux = |rho: &[f64], k: usize, a: usize| {
        let s = g.stride(k);
        let b = a + s;
        let v = -0.5 * (drift[k].values[a] + drift[k].values[b]);
        let h = g.spacing(k);
        v.max(0.0) * rho[a] + v.min(0.0) * rho[b] - diff * (rho[b] - rho[a]) / h
    };

    let mut rho = rho0.values.clone();
    let mut next = vec![0.0; rho.len()];
    for _ in 0..steps {
        next.par_iter_mut().enumerate().for_each(|(flat, out)| {
            let idx = g.unravel(flat);
            let mut change = 0.0;
            for k in 0..dim {
                let i = idx[k];
                let s = g.stride(k);
                let mut net = 0.0;
                if i > 0 {
                    net += face_flux(&rho, k, flat - s);
                }
                if i + 1 < g.n_points[k] {
                    net -= face_flux(&rho, k, flat);
                }
                change += net / cell(k, i);
            }
            *out = rho[flat] + dt * change;
        });
        std::mem::swap(&mut rho, &mut next);
        if let Some((i, v)) = rho
            .iter()
            .enumerate()
            .find(|(_, v)| **v < NEGATIVE_TOLERANCE || !v.is_finite())
        {
            return Err(Error::NegativeDensity {
                index: i,
                value: *v,
            });
        }
    }
    // Clip rounding-level negatives.
    for v in rho.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    GridFunction::new(g.clone(), rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::grid::GridGeometry;

    fn gaussian(g: &GridGeometry, mean: f64, var: f64) -> GridFunction {
        GridFunction::from_fn(g, |x| (-(x[0] - mean).powi(2) / (2.0 * var)).exp())
            .normalized()
            .unwrap()
    }

    fn moments(rho: &GridFunction) -> (f64, f64) {
        let g = &rho.geometry;
        let m = GridFunction::from_fn(g, |x| x[0] * rho.interpolate(x)).integral();
        let v = GridFunction::from_fn(g, |x| (x[0] - m).powi(2) * rho.interpolate(x)).integral();
        (m, v)
    }

    #[test]
    fn pure_diffusion_adds_variance() {
        let g = GridGeometry::uniform_1d(-5.0, 5.0, 401).unwrap();
        let rho0 = gaussian(&g, 0.0, 0.1);
        let zero = GridFunction::from_fn(&g, |_| 0.0);
        let (bi, t) = (0.5, 1.0);
        let rho = evolve_fokker_planck(&[zero], &rho0, bi, t, None).unwrap();
        let (_, v0) = moments(&rho0);
        let (_, v1) = moments(&rho);
        // ρ_t = (β⁻¹/2)ρ_xx spreads the variance by β⁻¹t.
        assert!(((v1 - v0) - bi * t).abs() <= 0.02 * bi * t, "{}", v1 - v0);
        assert!((rho.integral() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn mass_and_sign_preserved_in_2d() {
        let g = GridGeometry::new(vec![-2.0, -2.0], vec![2.0, 2.0], vec![41, 41]).unwrap();
        let rho0 = GridFunction::from_fn(&g, |x| (-(x[0] - 0.5).powi(2) - x[1].powi(2)).exp())
            .normalized()
            .unwrap();
        let d0 = GridFunction::from_fn(&g, |x| x[0] + x[1]);
        let d1 = GridFunction::from_fn(&g, |x| x[1] - 0.3 * x[0]);
        let rho = evolve_fokker_planck(&[d0, d1], &rho0, 0.2, 0.5, None).unwrap();
        rho.check_density(1e-10).unwrap();
    }

    #[test]
    fn cfl_checked() {
        let g = GridGeometry::uniform_1d(-1.0, 1.0, 101).unwrap();
        let rho0 = gaussian(&g, 0.0, 0.1);
        let d = GridFunction::from_fn(&g, |x| x[0]);
        let err = evolve_fokker_planck(&[d], &rho0, 1.0, 1.0, Some(0.1)).unwrap_err();
        assert!(matches!(err, Error::Cfl { .. }));
    }
}
