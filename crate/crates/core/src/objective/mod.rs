//! Loss functions and the named test corpus.
//!
//! An [`Objective`] is a pure, reentrant scalar function on ℝⁿ with an exact
//! gradient. Stochastic gradients draw from a caller-supplied [`Stream`], so
//! concurrent callers never share random state.

mod corpus;
mod functions;
mod mlp;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::Stream;

pub use corpus::{lookup, lookup_entry, TestCorpusEntry};
pub use functions::{
    make_double_well, make_quadratic, make_rugged_1d, Affine, DoubleWell, Noisy, Quadratic,
    Rugged1d, SineWave, Zero,
};
pub use mlp::{make_tiny_mlp, TinyMlp};

/// Largest dimension for which dense Hessians are formed.
pub const DENSE_HESSIAN_LIMIT: usize = 64;

pub type ObjectiveRef = Arc<dyn Objective>;

pub trait Objective: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64], out: &mut [f64]);

    /// Variance scale β⁻¹_mb of the stochastic gradient: E‖g_mb − ∇f‖² = β⁻¹_mb.
    fn noise_scale(&self) -> f64 {
        0.0
    }

    /// Unbiased stochastic gradient. The default adds isotropic Gaussian noise
    /// whose total variance is [`Objective::noise_scale`].
    fn stochastic_gradient(&self, x: &[f64], rng: &mut Stream, out: &mut [f64]) {
        self.gradient(x, out);
        let scale = self.noise_scale();
        if scale > 0.0 {
            let sd = (scale / out.len() as f64).sqrt();
            for g in out.iter_mut() {
                let e: f64 = StandardNormal.sample(rng);
                *g += sd * e;
            }
        }
    }

    /// Exact Hessian, when the objective knows it.
    fn hessian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        None
    }

    /// Box used when the objective is gridded by the PDE solvers.
    fn domain_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        None
    }

    /// Starting point for optimizer runs.
    fn initial_point(&self, rng: &mut Stream) -> Vec<f64> {
        let _ = rng;
        vec![1.0; self.dim()]
    }

    /// Minibatch gradient evaluations that make up one pass over the data.
    fn steps_per_epoch(&self) -> usize {
        1
    }

    fn gradient_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient(x, &mut g);
        g
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Central finite-difference gradient with per-coordinate step `h`.
pub fn gradient_fd(f: &dyn Objective, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let xi = x[i];
            xp[i] = xi + h;
            let fp = f.value(&xp);
            xp[i] = xi - h;
            let fm = f.value(&xp);
            xp[i] = xi;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Hessian-vector product by central differences of the gradient.
pub fn hessian_vector_product(f: &dyn Objective, x: &[f64], v: &[f64], h: f64) -> Vec<f64> {
    let n = x.len();
    let xp: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + h * b).collect();
    let xm: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - h * b).collect();
    let mut gp = vec![0.0; n];
    let mut gm = vec![0.0; n];
    f.gradient(&xp, &mut gp);
    f.gradient(&xm, &mut gm);
    gp.iter()
        .zip(&gm)
        .map(|(a, b)| (a - b) / (2.0 * h))
        .collect()
}

/// Dense Hessian: exact when available, otherwise symmetrised finite
/// differences of the gradient. Refused above [`DENSE_HESSIAN_LIMIT`].
pub fn dense_hessian(f: &dyn Objective, x: &[f64]) -> Result<DMatrix<f64>> {
    check_dim(f.dim(), x.len())?;
    if let Some(h) = f.hessian(x) {
        return Ok(h);
    }
    let n = x.len();
    if n > DENSE_HESSIAN_LIMIT {
        return Err(Error::invalid(format!(
            "dense Hessian requested in dimension {n} > {DENSE_HESSIAN_LIMIT}; use hessian_vector_product"
        )));
    }
    let scale = 1.0 + norm(x) / (n as f64).sqrt();
    let h = 1e-5 * scale;
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = hessian_vector_product(f, x, &e, h);
        for i in 0..n {
            m[(i, j)] = col[i];
        }
        e[j] = 0.0;
    }
    Ok((&m + m.transpose()) * 0.5)
}

/// Second derivative of a 1D objective.
pub fn second_derivative_1d(f: &dyn Objective, x: f64) -> f64 {
    match f.hessian(&[x]) {
        Some(h) => h[(0, 0)],
        None => {
            let h = 1e-5 * (1.0 + x.abs());
            let mut gp = [0.0];
            let mut gm = [0.0];
            f.gradient(&[x + h], &mut gp);
            f.gradient(&[x - h], &mut gm);
            (gp[0] - gm[0]) / (2.0 * h)
        }
    }
}

/// Gradient descent with Armijo backtracking; returns the polished point.
pub(crate) fn polish_minimum<F, G>(
    value: F,
    grad: G,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut step: f64 = 1.0;
    let mut fx = value(&x);
    for _ in 0..max_iter {
        grad(&x, &mut g);
        let gn2: f64 = g.iter().map(|v| v * v).sum();
        if gn2.sqrt() <= tol {
            break;
        }
        step = (step * 2.0).min(1e6);
        loop {
            for i in 0..n {
                trial[i] = x[i] - step * g[i];
            }
            let ft = value(&trial);
            if ft <= fx - 0.25 * step * gn2 {
                x.copy_from_slice(&trial);
                fx = ft;
                break;
            }
            step *= 0.5;
            if step < 1e-300 {
                return x;
            }
        }
    }
    x
}
