//! The inviscid equation u_t = −½|∇u|² through the Hopf-Lax formula
//!
//! ```text
//! u(x, t) = min_y { f(y) + ‖x − y‖²/(2t) }
//! ```
//!
//! and the proximal point that attains the minimum.

use rayon::prelude::*;

use super::cole_hopf::max_gradient_norm;
use super::grid::{GridFunction, GridGeometry};
use crate::error::{Error, Result};
use crate::objective::{check_dim, norm, polish_minimum, Objective};

/// Minimization lattice for one axis: the grid extended by `pad` on each side,
/// sharing its spacing so every grid node is also a candidate.
fn padded_axis(geometry: &GridGeometry, axis: usize, pad: f64) -> (Vec<f64>, usize) {
    let h = geometry.spacing(axis);
    let extra = (pad / h).ceil() as usize + 1;
    let count = geometry.n_points[axis] + 2 * extra;
    let start = geometry.lower[axis] - extra as f64 * h;
    ((0..count).map(|k| start + k as f64 * h).collect(), extra)
}

fn search_pad(f: &dyn Objective, t: f64, geometry: &GridGeometry) -> f64 {
    1.5 * t * max_gradient_norm(f, geometry)
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("t must be non-negative, got {t}")));
    }
    Ok(())
}

/// min_j { f_j + (x − q_j)²/(2t) } for every x in `xs`, by the lower envelope
/// of parabolas. `qs` must be strictly increasing and `xs` non-decreasing.
pub(crate) fn lower_envelope(qs: &[f64], fs: &[f64], t: f64, xs: &[f64]) -> Vec<f64> {
    let n = qs.len();
    let key = |j: usize| 2.0 * t * fs[j] + qs[j] * qs[j];
    let cross = |a: usize, b: usize| (key(b) - key(a)) / (2.0 * (qs[b] - qs[a]));
    let mut hull: Vec<usize> = Vec::with_capacity(n);
    let mut bounds: Vec<f64> = Vec::with_capacity(n);
    for j in 0..n {
        if !fs[j].is_finite() {
            continue;
        }
        loop {
            match hull.last() {
                None => {
                    hull.push(j);
                    bounds.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&top) => {
                    let s = cross(top, j);
                    if s <= *bounds.last().unwrap() {
                        hull.pop();
                        bounds.pop();
                    } else {
                        hull.push(j);
                        bounds.push(s);
                        break;
                    }
                }
            }
        }
    }
    let mut out = Vec::with_capacity(xs.len());
    let mut k = 0;
    for &x in xs {
        while k + 1 < hull.len() && bounds[k + 1] < x {
            k += 1;
        }
        let j = hull[k];
        out.push(fs[j] + (x - qs[j]).powi(2) / (2.0 * t));
    }
    out
}

/// Grid inf-convolution; linear time per axis via lower envelopes, separable in 2D.
pub fn solve_hj_hopf_lax(
    f: &dyn Objective,
    t: f64,
    geometry: &GridGeometry,
) -> Result<GridFunction> {
    check_dim(geometry.dim(), f.dim())?;
    check_time(t)?;
    if t == 0.0 {
        return GridFunction::sample(f, geometry);
    }
    let pad = search_pad(f, t, geometry);
    let (q0, _) = padded_axis(geometry, 0, pad);
    let x0 = geometry.coords(0);
    let values = if geometry.dim() == 1 {
        let fs: Vec<f64> = q0.par_iter().map(|&y| f.value(&[y])).collect();
        lower_envelope(&q0, &fs, t, &x0)
    } else {
        let (q1, _) = padded_axis(geometry, 1, pad);
        let x1 = geometry.coords(1);
        // Along axis 1 for every lattice row, then along axis 0 for every target column.
        let rows: Vec<Vec<f64>> = q0
            .par_iter()
            .map(|&y0| {
                let fs: Vec<f64> = q1.iter().map(|&y1| f.value(&[y0, y1])).collect();
                lower_envelope(&q1, &fs, t, &x1)
            })
            .collect();
        let cols: Vec<Vec<f64>> = (0..x1.len())
            .into_par_iter()
            .map(|j| {
                let fs: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                lower_envelope(&q0, &fs, t, &x0)
            })
            .collect();
        let n1 = x1.len();
        (0..x0.len() * n1)
            .map(|flat| cols[flat % n1][flat / n1])
            .collect()
    };
    GridFunction::new(geometry.clone(), values)
}

/// The same inf-convolution by exhaustive search over the padded lattice.
pub fn solve_hj_hopf_lax_brute_force(
    f: &dyn Objective,
    t: f64,
    geometry: &GridGeometry,
) -> Result<GridFunction> {
    check_dim(geometry.dim(), f.dim())?;
    check_time(t)?;
    if t == 0.0 {
        return GridFunction::sample(f, geometry);
    }
    let pad = search_pad(f, t, geometry);
    let axes: Vec<Vec<f64>> = (0..geometry.dim())
        .map(|k| padded_axis(geometry, k, pad).0)
        .collect();
    let candidates: Vec<(Vec<f64>, f64)> = if geometry.dim() == 1 {
        axes[0].iter().map(|&y| (vec![y], f.value(&[y]))).collect()
    } else {
        axes[0]
            .iter()
            .flat_map(|&a| axes[1].iter().map(move |&b| vec![a, b]))
            .map(|y| {
                let v = f.value(&y);
                (y, v)
            })
            .collect()
    };
    let values = (0..geometry.len())
        .into_par_iter()
        .map(|flat| {
            let x = geometry.point(flat);
            candidates
                .iter()
                .map(|(y, fy)| {
                    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
                    fy + d2 / (2.0 * t)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    GridFunction::new(geometry.clone(), values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxResult {
    /// y* = argmin_y f(y) + ‖x − y‖²/(2t).
    pub point: Vec<f64>,
    /// u(x, t), the minimum value.
    pub value: f64,
    /// (x − y*)/t, which equals ∇u(x, t) where u is differentiable.
    pub gradient: Vec<f64>,
    /// ∇f(y*); agrees with `gradient` at a stationary point.
    pub gradient_at_point: Vec<f64>,
    /// Two or more distinct minimizers were found with equal values.
    pub non_unique: bool,
    /// Every distinct local minimizer found, sorted by objective.
    pub candidates: Vec<(Vec<f64>, f64)>,
}

const SCAN_1D: usize = 4001;
const SCAN_2D: usize = 201;

/// Proximal point of `f` at `x` with parameter `t`.
///
/// In one and two dimensions the search starts from every discrete local
/// minimum of a grid scan around x, widening the window while the best scan
/// point touches its edge. Higher dimensions start from x and from x − t∇f(x).
pub fn prox_point(f: &dyn Objective, x: &[f64], t: f64) -> Result<ProxResult> {
    check_dim(f.dim(), x.len())?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("prox needs t > 0, got {t}")));
    }
    let n = x.len();
    let phi = |y: &[f64]| {
        f.value(y) + y.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (2.0 * t)
    };
    let dphi = |y: &[f64], out: &mut [f64]| {
        f.gradient(y, out);
        for i in 0..n {
            out[i] += (y[i] - x[i]) / t;
        }
    };
    let gx = f.gradient_vec(x);
    let mut starts: Vec<Vec<f64>> = Vec::new();
    if n <= 2 {
        let mut radius = 3.0 * t.sqrt() + 2.0 * t * norm(&gx);
        for _ in 0..40 {
            let (found, touches_edge) = scan_local_minima(&phi, x, radius);
            starts = found;
            if !touches_edge {
                break;
            }
            radius *= 2.0;
        }
    } else {
        starts.push(x.to_vec());
        starts.push(x.iter().zip(&gx).map(|(a, g)| a - t * g).collect());
    }
    let mut candidates: Vec<(Vec<f64>, f64)> = Vec::new();
    for s in starts {
        let y = polish_minimum(phi, dphi, &s, 1e-12, 100_000);
        let v = phi(&y);
        if !v.is_finite() {
            continue;
        }
        let dup = candidates.iter().any(|(c, _)| dist(c, &y) <= 1e-6);
        if !dup {
            candidates.push((y, v));
        }
    }
    if candidates.is_empty() {
        return Err(Error::NotFinite(
            "proximal objective is not finite near x".into(),
        ));
    }
    candidates.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (best, value) = candidates[0].clone();
    let non_unique = candidates[1..]
        .iter()
        .any(|(c, v)| dist(c, &best) > 1e-4 && (v - value).abs() < 1e-10);
    let gradient = x.iter().zip(&best).map(|(a, b)| (a - b) / t).collect();
    let gradient_at_point = f.gradient_vec(&best);
    Ok(ProxResult {
        point: best,
        value,
        gradient,
        gradient_at_point,
        non_unique,
        candidates,
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Discrete local minima of `phi` on a cube of half-width `radius` around `x`,
/// and whether the global scan minimum lies on the cube's boundary.
fn scan_local_minima(
    phi: &impl Fn(&[f64]) -> f64,
    x: &[f64],
    radius: f64,
) -> (Vec<Vec<f64>>, bool) {
    if x.len() == 1 {
        let m = SCAN_1D;
        let h = 2.0 * radius / (m - 1) as f64;
        let ys: Vec<f64> = (0..m).map(|i| x[0] - radius + i as f64 * h).collect();
        let vs: Vec<f64> = ys.iter().map(|&y| phi(&[y])).collect();
        let best = argmin(&vs);
        let mins = (0..m)
            .filter(|&i| {
                (i == 0 || vs[i] <= vs[i - 1])
                    && (i + 1 == m || vs[i] <= vs[i + 1])
                    && vs[i].is_finite()
            })
            .map(|i| vec![ys[i]])
            .collect();
        (mins, best == 0 || best + 1 == m)
    } else {
        let m = SCAN_2D;
        let h = 2.0 * radius / (m - 1) as f64;
        let coord = |k: usize, i: usize| x[k] - radius + i as f64 * h;
        let vs: Vec<f64> = (0..m * m)
            .map(|f| phi(&[coord(0, f / m), coord(1, f % m)]))
            .collect();
        let best = argmin(&vs);
        let on_edge = |f: usize| {
            let (i, j) = (f / m, f % m);
            i == 0 || j == 0 || i + 1 == m || j + 1 == m
        };
        let mins = (0..m * m)
            .filter(|&f| {
                let (i, j) = (f / m, f % m);
                let v = vs[f];
                v.is_finite()
                    && (i == 0 || v <= vs[f - m])
                    && (i + 1 == m || v <= vs[f + m])
                    && (j == 0 || v <= vs[f - 1])
                    && (j + 1 == m || v <= vs[f + 1])
            })
            .map(|f| vec![coord(0, f / m), coord(1, f % m)])
            .collect();
        (mins, on_edge(best))
    }
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{make_double_well, make_quadratic, make_rugged_1d};

    #[test]
    fn envelope_matches_brute_force_on_random_data() {
        let qs: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let fs: Vec<f64> = qs.iter().map(|q| (7.0 * q).sin() + 0.3 * q).collect();
        let xs: Vec<f64> = (0..80).map(|i| -0.5 + i as f64 * 0.075).collect();
        let env = lower_envelope(&qs, &fs, 0.05, &xs);
        for (x, e) in xs.iter().zip(&env) {
            let b = qs
                .iter()
                .zip(&fs)
                .map(|(q, f)| f + (x - q).powi(2) / 0.1)
                .fold(f64::INFINITY, f64::min);
            assert!((e - b).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_value() {
        let f = make_quadratic(1.0, vec![], 1).unwrap();
        let g = GridGeometry::uniform_1d(-4.0, 4.0, 801).unwrap();
        let u = solve_hj_hopf_lax(&f, 1.0, &g).unwrap();
        assert!((u.interpolate(&[2.0]) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn envelope_equals_brute_force_2d() {
        let f = make_quadratic(1.5, vec![0.3, -0.2], 2).unwrap();
        let g = GridGeometry::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![15, 17]).unwrap();
        let a = solve_hj_hopf_lax(&f, 0.4, &g).unwrap();
        let b = solve_hj_hopf_lax_brute_force(&f, 0.4, &g).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn double_well_minima_survive_small_t() {
        let f = make_double_well(1.0).unwrap();
        let g = GridGeometry::uniform_1d(-2.0, 2.0, 401).unwrap();
        let u = solve_hj_hopf_lax_brute_force(&f, 0.05, &g).unwrap();
        assert!(u.interpolate(&[1.0]).abs() < 1e-12);
        assert!(u.interpolate(&[-1.0]).abs() < 1e-12);
    }

    #[test]
    fn prox_of_quadratic() {
        let f = make_quadratic(1.0, vec![], 1).unwrap();
        let p = prox_point(&f, &[2.0], 1.0).unwrap();
        assert!((p.point[0] - 1.0).abs() < 1e-10);
        assert!(!p.non_unique);
    }

    #[test]
    fn prox_gradient_relation_on_double_well() {
        let f = make_double_well(1.0).unwrap();
        for &x in &[-1.7, -0.6, 0.4, 1.2, 2.0] {
            let p = prox_point(&f, &[x], 0.1).unwrap();
            assert!((p.gradient[0] - p.gradient_at_point[0]).abs() <= 1e-6);
        }
    }

    #[test]
    fn prox_flags_symmetric_minimizers() {
        let f = make_double_well(1.0).unwrap();
        let p = prox_point(&f, &[0.0], 0.5).unwrap();
        assert!(p.non_unique);
        assert!((p.candidates[0].0[0] + p.candidates[1].0[0]).abs() < 1e-6);
    }

    #[test]
    fn prox_matches_grid_solution() {
        let f = make_rugged_1d(3, 5).unwrap();
        let g = GridGeometry::uniform_1d(-2.0, 2.0, 4001).unwrap();
        let u = solve_hj_hopf_lax(&f, 0.2, &g).unwrap();
        for &x in &[-1.3, -0.2, 0.9] {
            let p = prox_point(&f, &[x], 0.2).unwrap();
            assert!((u.interpolate(&[x]) - p.value).abs() < 1e-4);
        }
    }
}
