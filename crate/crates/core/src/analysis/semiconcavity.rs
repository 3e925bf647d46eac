//! Decay of one-sided second derivatives along HJ flows.
//!
//! If f has semiconcavity constant C_k along axis k then u(·, t) has at most
//! 1/(C_k⁻¹ + t) there, and the Laplacian is bounded by 1/(C_Lap⁻¹ + t/n).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::GridFunction;

/// Semiconcavity constants of the initial data; `f64::INFINITY` means unknown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiconcavityConstants {
    pub axes: Vec<f64>,
    pub lap: f64,
}

impl SemiconcavityConstants {
    pub fn unknown(n: usize) -> Self {
        SemiconcavityConstants {
            axes: vec![f64::INFINITY; n],
            lap: f64::INFINITY,
        }
    }

    /// Measured from gridded initial data: largest second difference per axis
    /// and largest discrete Laplacian, floored at zero.
    pub fn measure(f: &GridFunction) -> Self {
        SemiconcavityConstants {
            axes: (0..f.dim())
                .map(|k| f.max_second_difference(k).max(0.0))
                .collect(),
            lap: f.max_laplacian().max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiconcavityRow {
    pub t: f64,
    pub axis_max: Vec<f64>,
    pub axis_bound: Vec<f64>,
    pub lap_max: f64,
    pub lap_bound: f64,
    /// Slack allowed for discretization, 10h.
    pub tol: f64,
    /// Number of axis and Laplacian checks exceeding bound + tol.
    pub violations: usize,
}

/// 1/(C⁻¹ + t), reading C = ∞ as 1/t.
pub fn decay_bound(c: f64, t: f64) -> f64 {
    1.0 / (1.0 / c + t)
}

/// Checks every (t, u(·, t)) in the series against the decay bounds.
pub fn semiconcavity_report(
    series: &[(f64, GridFunction)],
    constants: &SemiconcavityConstants,
) -> Result<Vec<SemiconcavityRow>> {
    let mut rows = Vec::with_capacity(series.len());
    for (t, u) in series {
        let n = u.dim();
        if constants.axes.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: constants.axes.len(),
            });
        }
        let h = (0..n).map(|k| u.geometry.spacing(k)).fold(0.0, f64::max);
        let tol = 10.0 * h;
        let axis_max: Vec<f64> = (0..n).map(|k| u.max_second_difference(k)).collect();
        let axis_bound: Vec<f64> = constants.axes.iter().map(|c| decay_bound(*c, *t)).collect();
        let lap_max = u.max_laplacian();
        let lap_bound = 1.0 / (1.0 / constants.lap + t / n as f64);
        let mut violations = axis_max
            .iter()
            .zip(&axis_bound)
            .filter(|(m, b)| **m > **b + tol)
            .count();
        if lap_max > lap_bound + tol {
            violations += 1;
        }
        rows.push(SemiconcavityRow {
            t: *t,
            axis_max,
            axis_bound,
            lap_max,
            lap_bound,
            tol,
            violations,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::make_quadratic;
    use crate::pde::{solve_viscous_hj_cole_hopf, Boundary, GridGeometry};

    #[test]
    fn quadratic_meets_bound_with_equality() {
        let c = 2.0;
        let f = make_quadratic(c, vec![], 1).unwrap();
        let g = GridGeometry::uniform_1d(-4.0, 4.0, 801).unwrap();
        let f0 = GridFunction::sample(&f, &g).unwrap();
        let constants = SemiconcavityConstants::measure(&f0);
        assert!((constants.axes[0] - c).abs() < 1e-9);
        let series: Vec<(f64, GridFunction)> = [0.1, 0.5, 1.0]
            .iter()
            .map(|&t| {
                (
                    t,
                    solve_viscous_hj_cole_hopf(&f, 0.1, t, &g, Boundary::Extrapolating).unwrap(),
                )
            })
            .collect();
        let h = g.spacing(0);
        for row in semiconcavity_report(&series, &constants).unwrap() {
            assert_eq!(row.violations, 0);
            assert!(
                (row.axis_max[0] - 1.0 / (row.t + 1.0 / c)).abs() < h,
                "{row:?}"
            );
        }
    }

    #[test]
    fn infinite_constant_gives_one_over_t() {
        assert_eq!(decay_bound(f64::INFINITY, 0.5), 2.0);
        assert!((decay_bound(1.0, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn violation_is_flagged() {
        let g = GridGeometry::uniform_1d(-1.0, 1.0, 21).unwrap();
        let u = GridFunction::from_fn(&g, |x| 50.0 * x[0] * x[0]);
        let rows = semiconcavity_report(&[(1.0, u)], &SemiconcavityConstants::unknown(1)).unwrap();
        assert_eq!(rows[0].violations, 2);
    }
}
