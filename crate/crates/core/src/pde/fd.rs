//! Explicit monotone finite differences for Hamilton-Jacobi equations.
//!
//! The scheme advances
//!
//! ```text
//! w_τ = −Σ_k Ĥ_k(D⁻_k w, D⁺_k w) + (β⁻¹/2) Δ_h w
//! ```
//!
//! where Ĥ_k is the Godunov flux of H(p) = ½p² + b·p along axis k (b = 0 for
//! the smoothing equation, b = ∇f for the backward HJB equation) and Δ_h is
//! the centered Laplacian. Outside the box, values are linearly extrapolated
//! unless the boundary is periodic.

use rayon::prelude::*;

use super::grid::{GridFunction, GridGeometry};
use super::{Boundary, PdeSolveConfig};
use crate::error::{Error, Result};
use crate::objective::{check_dim, Objective};

/// Godunov flux for ½(p + b)² − ½b², convex with its minimum at p = −b.
#[inline]
fn godunov(pm: f64, pp: f64, b: f64) -> f64 {
    let l = (pm + b).max(0.0);
    let r = (pp + b).min(0.0);
    0.5 * (l * l).max(r * r) - 0.5 * b * b
}

struct Stencil<'a> {
    geometry: &'a GridGeometry,
    periodic: bool,
}

impl Stencil<'_> {
    /// Left and right neighbour values of `flat` along `axis`.
    #[inline]
    fn neighbours(&self, u: &[f64], flat: usize, axis: usize) -> (f64, f64) {
        let g = self.geometry;
        let s = g.stride(axis);
        let n = g.n_points[axis];
        let i = g.unravel(flat)[axis];
        let left = if i > 0 {
            u[flat - s]
        } else if self.periodic {
            u[flat + (n - 2) * s]
        } else {
            2.0 * u[flat] - u[flat + s]
        };
        let right = if i + 1 < n {
            u[flat + s]
        } else if self.periodic {
            u[flat - (n - 2) * s]
        } else {
            2.0 * u[flat] - u[flat - s]
        };
        (left, right)
    }

    /// Largest characteristic speed |p + b| per axis.
    fn speeds(&self, u: &[f64], drift: Option<&[Vec<f64>]>) -> Vec<f64> {
        let g = self.geometry;
        (0..g.dim())
            .map(|k| {
                let h = g.spacing(k);
                (0..g.len())
                    .into_par_iter()
                    .map(|flat| {
                        let (l, r) = self.neighbours(u, flat, k);
                        let b = drift.map_or(0.0, |d| d[k][flat]);
                        let pm = (u[flat] - l) / h + b;
                        let pp = (r - u[flat]) / h + b;
                        pm.abs().max(pp.abs())
                    })
                    .reduce(|| 0.0, f64::max)
            })
            .collect()
    }

    fn limit(&self, u: &[f64], beta_inv: f64, drift: Option<&[Vec<f64>]>) -> f64 {
        let g = self.geometry;
        let speeds = self.speeds(u, drift);
        let rate: f64 = (0..g.dim())
            .map(|k| {
                let h = g.spacing(k);
                speeds[k] / h + beta_inv / (h * h)
            })
            .sum();
        if rate > 0.0 {
            1.0 / rate
        } else {
            f64::INFINITY
        }
    }

    fn step(&self, u: &[f64], out: &mut [f64], dt: f64, beta_inv: f64, drift: Option<&[Vec<f64>]>) {
        let g = self.geometry;
        out.par_iter_mut().enumerate().for_each(|(flat, o)| {
            let c = u[flat];
            let mut rhs = 0.0;
            for k in 0..g.dim() {
                let h = g.spacing(k);
                let (l, r) = self.neighbours(u, flat, k);
                let b = drift.map_or(0.0, |d| d[k][flat]);
                rhs -= godunov((c - l) / h, (r - c) / h, b);
                rhs += 0.5 * beta_inv * (l - 2.0 * c + r) / (h * h);
            }
            *o = c + dt * rhs;
        });
    }
}

/// Largest stable time step for data `u`: 1 / Σ_k (max|p_k|/h_k + β⁻¹/h_k²),
/// which in 1D is h²/(β⁻¹ + h·max|∇u|).
pub fn stability_limit(u: &GridFunction, beta_inv: f64, boundary: Boundary) -> f64 {
    let st = Stencil {
        geometry: &u.geometry,
        periodic: boundary == Boundary::Periodic,
    };
    st.limit(&u.values, beta_inv, None)
}

fn check_finite(values: &[f64], what: &str, step: usize) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NotFinite(format!(
            "{what}: node {i} after step {step}"
        )));
    }
    Ok(())
}

/// u(·, t) for u_t = −½|∇u|² + (β⁻¹/2)Δu, u(·, 0) = f.
pub fn solve_hj_monotone_fd(
    f: &dyn Objective,
    cfg: &PdeSolveConfig,
    geometry: &GridGeometry,
) -> Result<GridFunction> {
    check_dim(geometry.dim(), f.dim())?;
    let u0 = GridFunction::sample(f, geometry)?;
    solve_hj_monotone_fd_from(&u0, cfg.beta_inv, cfg.t_final, cfg.dt, cfg.boundary)
}

/// As [`solve_hj_monotone_fd`], starting from grid data.
///
/// When `dt` is given it must satisfy the stability limit; otherwise the step
/// is 90% of the limit, shortened so that an integer number of steps reaches t.
pub fn solve_hj_monotone_fd_from(
    u0: &GridFunction,
    beta_inv: f64,
    t: f64,
    dt: Option<f64>,
    boundary: Boundary,
) -> Result<GridFunction> {
    if !(beta_inv >= 0.0) || !beta_inv.is_finite() {
        return Err(Error::invalid(format!(
            "beta_inv must be non-negative, got {beta_inv}"
        )));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("t must be non-negative, got {t}")));
    }
    if t == 0.0 {
        return Ok(u0.clone());
    }
    let st = Stencil {
        geometry: &u0.geometry,
        periodic: boundary == Boundary::Periodic,
    };
    let limit = st.limit(&u0.values, beta_inv, None);
    let dt = match dt {
        Some(dt) if !(dt > 0.0) => {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")))
        }
        Some(dt) if dt > limit => return Err(Error::Cfl { dt, limit }),
        Some(dt) => dt,
        None => 0.9 * limit,
    };
    let steps = (t / dt - 1e-9).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let mut u = u0.values.clone();
    let mut next = vec![0.0; u.len()];
    for s in 0..steps {
        st.step(&u, &mut next, dt, beta_inv, None);
        std::mem::swap(&mut u, &mut next);
        if s % 64 == 63 || s + 1 == steps {
            check_finite(&u, "monotone scheme", s + 1)?;
        }
    }
    GridFunction::new(u0.geometry.clone(), u)
}

/// Value function of the stochastic control problem on [0, T], stored at
/// equally spaced times together with its spatial gradient.
#[derive(Debug, Clone)]
pub struct HjbSolution {
    /// Increasing times s₀ = 0 < … < s_m = T.
    pub times: Vec<f64>,
    /// u(·, s_j).
    pub values: Vec<GridFunction>,
    /// ∇u(·, s_j), one grid function per axis.
    pub gradients: Vec<Vec<GridFunction>>,
}

impl HjbSolution {
    fn bracket(&self, s: f64) -> (usize, f64) {
        let m = self.times.len() - 1;
        if m == 0 {
            return (0, 0.0);
        }
        let horizon = self.times[m];
        let pos = (s / horizon * m as f64).clamp(0.0, m as f64);
        let j = (pos.floor() as usize).min(m - 1);
        (j, pos - j as f64)
    }

    /// u(x, s) by multilinear interpolation in x and linear interpolation in s.
    pub fn value(&self, x: &[f64], s: f64) -> f64 {
        let (j, w) = self.bracket(s);
        let a = self.values[j].interpolate(x);
        if w == 0.0 {
            return a;
        }
        (1.0 - w) * a + w * self.values[j + 1].interpolate(x)
    }

    /// The optimal control α(x, s) = ∇u(x, s).
    pub fn control(&self, x: &[f64], s: f64, out: &mut [f64]) {
        let (j, w) = self.bracket(s);
        for (k, o) in out.iter_mut().enumerate() {
            let a = self.gradients[j][k].interpolate(x);
            *o = if w == 0.0 {
                a
            } else {
                (1.0 - w) * a + w * self.gradients[j + 1][k].interpolate(x)
            };
        }
    }
}

/// Solves −u_s = −∇f·∇u − ½|∇u|² + (β⁻¹/2)Δu backward from u(·, T) = V.
///
/// The time step adapts to the current stability limit; `n_snapshots`
/// intervals of storage are kept.
pub fn solve_hjb_backward(
    f: &dyn Objective,
    terminal: &GridFunction,
    beta_inv: f64,
    horizon: f64,
    n_snapshots: usize,
) -> Result<HjbSolution> {
    let geometry = &terminal.geometry;
    check_dim(geometry.dim(), f.dim())?;
    if !(beta_inv >= 0.0) || !(horizon >= 0.0) || n_snapshots == 0 {
        return Err(Error::invalid(
            "HJB solve needs beta_inv ≥ 0, T ≥ 0 and at least one snapshot",
        ));
    }
    let drift: Vec<Vec<f64>> = {
        let grads: Vec<Vec<f64>> = (0..geometry.len())
            .map(|flat| f.gradient_vec(&geometry.point(flat)))
            .collect();
        (0..geometry.dim())
            .map(|k| grads.iter().map(|g| g[k]).collect())
            .collect()
    };
    let st = Stencil {
        geometry,
        periodic: false,
    };
    let mut w = terminal.values.clone();
    let mut next = vec![0.0; w.len()];
    // Snapshots in backward time τ = T − s.
    let mut backward = vec![terminal.clone()];
    let mut tau = 0.0;
    let mut steps = 0usize;
    for j in 1..=n_snapshots {
        let target = horizon * j as f64 / n_snapshots as f64;
        while tau < target - 1e-14 * horizon.max(1.0) {
            let limit = st.limit(&w, beta_inv, Some(&drift));
            let dt = (0.9 * limit).min(target - tau);
            st.step(&w, &mut next, dt, beta_inv, Some(&drift));
            std::mem::swap(&mut w, &mut next);
            tau += dt;
            steps += 1;
            if steps.is_multiple_of(64) {
                check_finite(&w, "HJB", steps)?;
            }
        }
        check_finite(&w, "HJB", steps)?;
        backward.push(GridFunction::new(geometry.clone(), w.clone())?);
    }
    backward.reverse();
    let times = (0..=n_snapshots)
        .map(|j| horizon * j as f64 / n_snapshots as f64)
        .collect();
    let gradients = backward.iter().map(|u| u.gradient()).collect();
    Ok(HjbSolution {
        times,
        values: backward,
        gradients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{make_quadratic, Zero};
    use crate::pde::Scheme;

    #[test]
    fn zero_time_returns_initial_data() {
        let f = make_quadratic(1.0, vec![], 1).unwrap();
        let g = GridGeometry::uniform_1d(-1.0, 1.0, 11).unwrap();
        let cfg = PdeSolveConfig::new(Scheme::MonotoneFd, 0.1, 0.0);
        let u = solve_hj_monotone_fd(&f, &cfg, &g).unwrap();
        assert_eq!(u, GridFunction::sample(&f, &g).unwrap());
    }

    #[test]
    fn quadratic_inviscid_is_first_order() {
        let f = make_quadratic(1.0, vec![], 1).unwrap();
        let mut errs = Vec::new();
        for n in [101, 201, 401] {
            let g = GridGeometry::uniform_1d(-4.0, 4.0, n).unwrap();
            let cfg = PdeSolveConfig::new(Scheme::MonotoneFd, 0.0, 1.0);
            let u = solve_hj_monotone_fd(&f, &cfg, &g).unwrap();
            let e = u
                .interior_nodes()
                .filter(|&i| g.coord(0, i).abs() <= 2.0)
                .map(|i| (u.values[i] - g.coord(0, i).powi(2) / 4.0).abs())
                .fold(0.0, f64::max);
            errs.push((e, g.spacing(0)));
        }
        for (e, h) in &errs {
            assert!(*e <= 2.0 * h, "error {e} at h {h}");
        }
        assert!(errs[2].0 < errs[0].0);
    }

    #[test]
    fn cfl_violation_rejected() {
        let f = make_quadratic(1.0, vec![], 1).unwrap();
        let g = GridGeometry::uniform_1d(-1.0, 1.0, 101).unwrap();
        let mut cfg = PdeSolveConfig::new(Scheme::MonotoneFd, 1.0, 1.0);
        cfg.dt = Some(0.1);
        assert!(matches!(
            solve_hj_monotone_fd(&f, &cfg, &g),
            Err(Error::Cfl { .. })
        ));
    }

    #[test]
    fn hjb_without_drift_or_gradient_is_heat_like() {
        // V linear, f ≡ 0: u(x, s) = V(x) − ½|a|²(T − s).
        let f = Zero { n: 1 };
        let g = GridGeometry::uniform_1d(-1.0, 1.0, 41).unwrap();
        let v = GridFunction::from_fn(&g, |x| 0.5 * x[0]);
        let sol = solve_hjb_backward(&f, &v, 0.1, 1.0, 4).unwrap();
        for flat in 0..g.len() {
            let x = g.coord(0, flat);
            assert!((sol.values[0].values[flat] - (0.5 * x - 0.125)).abs() < 1e-10);
        }
        let mut a = [0.0];
        sol.control(&[0.3], 0.6, &mut a);
        assert!((a[0] - 0.5).abs() < 1e-10);
    }
}
