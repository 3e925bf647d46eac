//! One-dimensional tools built on the characteristics of u_t = −½u_x².
//!
//! Along characteristics p = u_x is constant and satisfies p = f′(x − tp),
//! which stays uniquely solvable until 1 + t f″(x − tp) first vanishes.

use super::grid::GridFunction;
use crate::error::{Error, Result};
use crate::objective::{check_dim, second_derivative_1d, Objective};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurgersResult {
    pub p: f64,
    /// The fixed point was found and lies on a characteristic that has not crossed another.
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

const MAX_ITER: usize = 1000;
const RESIDUAL_TOL: f64 = 1e-12;

/// Solves p = f′(x − tp) by damped Newton iteration started at p = f′(x).
///
/// `converged` is false when the iteration stalls or when the root found has
/// 1 + t f″(x − tp) ≤ 0, which happens only past the shock time.
pub fn burgers_characteristic_check(f: &dyn Objective, x: f64, t: f64) -> Result<BurgersResult> {
    check_dim(1, f.dim())?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("t must be non-negative, got {t}")));
    }
    let fp = |y: f64| {
        let mut g = [0.0];
        f.gradient(&[y], &mut g);
        g[0]
    };
    let residual = |p: f64| p - fp(x - t * p);
    let mut p = fp(x);
    let mut r = residual(p);
    let mut iterations = 0;
    while iterations < MAX_ITER && r.abs() >= RESIDUAL_TOL {
        iterations += 1;
        let jac = 1.0 + t * second_derivative_1d(f, x - t * p);
        let dir = if jac.abs() > 1e-8 { -r / jac } else { -r };
        let mut lambda = 1.0;
        loop {
            let trial = p + lambda * dir;
            let rt = residual(trial);
            if rt.abs() < r.abs() || lambda < 1e-8 {
                p = trial;
                r = rt;
                break;
            }
            lambda *= 0.5;
        }
    }
    let stable = 1.0 + t * second_derivative_1d(f, x - t * p) > 0.0;
    Ok(BurgersResult {
        p,
        converged: r.abs() < RESIDUAL_TOL && stable,
        iterations,
        residual: r,
    })
}

/// Undivided second differences below this count as non-convex.
const CONVEXITY_TOL: f64 = -1e-10;

/// The widest interval of grid nodes around the local minimum `x_min` of `u`
/// on which the second difference is non-negative (up to rounding).
pub fn convexity_interval(u: &GridFunction, x_min: f64) -> Result<(f64, f64)> {
    if u.dim() != 1 {
        return Err(Error::invalid("convexity intervals are one-dimensional"));
    }
    let g = &u.geometry;
    let n = g.n_points[0];
    if !g.contains(&[x_min]) {
        return Err(Error::invalid(format!(
            "x_min = {x_min} lies outside the grid"
        )));
    }
    let i = (((x_min - g.lower[0]) / g.spacing(0)).round() as usize).min(n - 1);
    let v = &u.values;
    let is_min = (i == 0 || v[i] <= v[i - 1]) && (i + 1 == n || v[i] <= v[i + 1]);
    if !is_min {
        return Err(Error::NotLocalMinimum(format!(
            "x = {} is not a grid-local minimum of u",
            g.coord(0, i)
        )));
    }
    let d2 = |k: usize| v[k + 1] - 2.0 * v[k] + v[k - 1];
    let mut a = i;
    while a > 0 && (a - 1 == 0 || d2(a - 1) >= CONVEXITY_TOL) {
        a -= 1;
    }
    let mut b = i;
    while b + 1 < n && (b + 1 == n - 1 || d2(b + 1) >= CONVEXITY_TOL) {
        b += 1;
    }
    Ok((g.coord(0, a), g.coord(0, b)))
}
