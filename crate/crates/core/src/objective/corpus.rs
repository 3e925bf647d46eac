//! Named objectives addressable from the command line.
//!
//! | pattern                 | objective                                   |
//! |-------------------------|---------------------------------------------|
//! | `quadratic_c{c}_n{n}`   | c‖x‖²/2 in dimension n                      |
//! | `double_well_a{a}`      | (x² − a²)²                                  |
//! | `rugged_s{seed}_m{m}`   | seeded multi-well 1D landscape              |
//! | `mlp_h{h}_n{n}[_b{b}]`  | tiny ReLU classifier, batch size b (16)     |
//! | `zero_n{n}`, `sine_k{k}`| degenerate cases used by the PDE tests      |
//!
//! Any name may carry a `+noise{v}` suffix that adds isotropic gradient noise
//! of total variance `v`.

use std::sync::Arc;

use super::{
    make_double_well, make_quadratic, make_rugged_1d, make_tiny_mlp, polish_minimum,
    second_derivative_1d, Noisy, Objective, ObjectiveRef, SineWave, Zero,
};
use crate::error::{Error, Result};

const DEFAULT_BATCH: usize = 16;

#[derive(Debug, Clone)]
pub struct TestCorpusEntry {
    pub name: String,
    pub objective: ObjectiveRef,
    /// Local minima with their values, polished to ‖∇f‖ ≤ 1e-8.
    pub known_minima: Vec<(Vec<f64>, f64)>,
    pub domain_box: Option<(Vec<f64>, Vec<f64>)>,
}

fn parse_num<T: std::str::FromStr>(name: &str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::UnknownObjective(name.to_string()))
}

/// Resolves a corpus name to an objective.
pub fn lookup(name: &str) -> Result<ObjectiveRef> {
    let (base, noise) = match name.split_once("+noise") {
        Some((b, v)) => (b, Some(parse_num::<f64>(name, v)?)),
        None => (name, None),
    };
    let obj: ObjectiveRef = if let Some(rest) = base.strip_prefix("quadratic_c") {
        let (c, n) = rest
            .split_once("_n")
            .ok_or_else(|| Error::UnknownObjective(name.into()))?;
        Arc::new(make_quadratic(
            parse_num(name, c)?,
            vec![],
            parse_num(name, n)?,
        )?)
    } else if let Some(a) = base.strip_prefix("double_well_a") {
        Arc::new(make_double_well(parse_num(name, a)?)?)
    } else if let Some(rest) = base.strip_prefix("rugged_s") {
        let (s, m) = rest
            .split_once("_m")
            .ok_or_else(|| Error::UnknownObjective(name.into()))?;
        Arc::new(make_rugged_1d(parse_num(name, s)?, parse_num(name, m)?)?)
    } else if let Some(rest) = base.strip_prefix("mlp_h") {
        let (h, rest) = rest
            .split_once("_n")
            .ok_or_else(|| Error::UnknownObjective(name.into()))?;
        let (n, b) = match rest.split_once("_b") {
            Some((n, b)) => (n, parse_num(name, b)?),
            None => (rest, DEFAULT_BATCH),
        };
        let n: usize = parse_num(name, n)?;
        Arc::new(make_tiny_mlp(0, parse_num(name, h)?, n, b)?)
    } else if let Some(n) = base.strip_prefix("zero_n") {
        Arc::new(Zero {
            n: parse_num(name, n)?,
        })
    } else if let Some(k) = base.strip_prefix("sine_k") {
        Arc::new(SineWave {
            k: parse_num(name, k)?,
        })
    } else {
        return Err(Error::UnknownObjective(name.to_string()));
    };
    match noise {
        Some(v) => Ok(Arc::new(Noisy::new(obj, v)?)),
        None => Ok(obj),
    }
}

/// Resolves a name and attaches its known minima.
pub fn lookup_entry(name: &str) -> Result<TestCorpusEntry> {
    let objective = lookup(name)?;
    let domain_box = objective.domain_box();
    let known_minima = find_minima(objective.as_ref(), domain_box.as_ref());
    Ok(TestCorpusEntry {
        name: name.to_string(),
        objective,
        known_minima,
        domain_box,
    })
}

fn find_minima(f: &dyn Objective, domain: Option<&(Vec<f64>, Vec<f64>)>) -> Vec<(Vec<f64>, f64)> {
    // Closed-form entries first; grid scan for 1D landscapes.
    let name = f.name();
    if name.starts_with("mlp_") || name.starts_with("zero_") {
        return Vec::new();
    }
    if name.starts_with("quadratic_") {
        let x = vec![0.0; f.dim()];
        let v = f.value(&x);
        return vec![(x, v)];
    }
    let Some((lo, hi)) = domain else {
        return Vec::new();
    };
    if f.dim() != 1 {
        return Vec::new();
    }
    let n = 8001;
    let h = (hi[0] - lo[0]) / (n - 1) as f64;
    let vals: Vec<f64> = (0..n).map(|i| f.value(&[lo[0] + i as f64 * h])).collect();
    let mut out: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 1..n - 1 {
        if vals[i] <= vals[i - 1] && vals[i] < vals[i + 1] {
            let x0 = [lo[0] + i as f64 * h];
            let mut x =
                polish_minimum(|x| f.value(x), |x, g| f.gradient(x, g), &x0, 1e-12, 100_000);
            // Newton on f' removes the residual left by the line search.
            for _ in 0..8 {
                let g = f.gradient_vec(&x)[0];
                let c = second_derivative_1d(f, x[0]);
                if g.abs() <= 1e-14 || c <= 0.0 {
                    break;
                }
                x[0] -= g / c;
            }
            if out.iter().all(|(m, _)| (m[0] - x[0]).abs() > 1e-6) {
                let v = f.value(&x);
                out.push((x, v));
            }
        }
    }
    out
}
