use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Objective, ObjectiveRef};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// f(x) = c‖x‖²/2 + p·x.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub c: f64,
    pub p: Vec<f64>,
}

pub fn make_quadratic(c: f64, p: Vec<f64>, n: usize) -> Result<Quadratic> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::invalid(format!(
            "quadratic curvature must be positive, got {c}"
        )));
    }
    if n == 0 {
        return Err(Error::invalid("quadratic dimension must be positive"));
    }
    let p = if p.is_empty() { vec![0.0; n] } else { p };
    super::check_dim(n, p.len())?;
    Ok(Quadratic { c, p })
}

impl Quadratic {
    pub fn minimizer(&self) -> Vec<f64> {
        self.p.iter().map(|p| -p / self.c).collect()
    }
}

impl Objective for Quadratic {
    fn name(&self) -> String {
        format!("quadratic_c{}_n{}", self.c, self.p.len())
    }

    fn dim(&self) -> usize {
        self.p.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.p)
            .map(|(x, p)| 0.5 * self.c * x * x + p * x)
            .sum()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for ((o, x), p) in out.iter_mut().zip(x).zip(&self.p) {
            *o = self.c * x + p;
        }
    }

    fn hessian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        let n = self.dim();
        Some(DMatrix::identity(n, n) * self.c)
    }

    fn domain_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.dim();
        Some((vec![-4.0; n], vec![4.0; n]))
    }

    fn initial_point(&self, rng: &mut Stream) -> Vec<f64> {
        (0..self.dim())
            .map(|_| StandardNormal.sample(rng))
            .collect()
    }
}

/// f(x) = (x² − a²)² on the real line.
#[derive(Debug, Clone)]
pub struct DoubleWell {
    pub a: f64,
}

pub fn make_double_well(a: f64) -> Result<DoubleWell> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::invalid(format!(
            "double-well half-width must be positive, got {a}"
        )));
    }
    Ok(DoubleWell { a })
}

impl Objective for DoubleWell {
    fn name(&self) -> String {
        format!("double_well_a{}", self.a)
    }

    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64]) -> f64 {
        let s = x[0] * x[0] - self.a * self.a;
        s * s
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 4.0 * x[0] * (x[0] * x[0] - self.a * self.a);
    }

    fn hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(
            1,
            1,
            12.0 * x[0] * x[0] - 4.0 * self.a * self.a,
        ))
    }

    fn domain_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        Some((vec![-2.5 * self.a], vec![2.5 * self.a]))
    }

    fn initial_point(&self, rng: &mut Stream) -> Vec<f64> {
        vec![rng.random_range(-2.0 * self.a..2.0 * self.a)]
    }
}

/// Coercive envelope plus trigonometric ripples, with many local minima.
///
/// f(x) = x²/2 + A(1 − cos ω₀(x − s)) + Σⱼ Aⱼ sin(ωⱼ x + φⱼ)
///
/// The dominant ripple has `n_modes + 1` periods across the box [−2, 2] and
/// its slope amplitude A·ω₀ is twice the largest envelope slope, so every
/// ripple trough inside the box is a local minimum. The seeded low-frequency
/// terms break the symmetry between wells.
#[derive(Debug, Clone)]
pub struct Rugged1d {
    pub seed: u64,
    pub n_modes: usize,
    amplitude: f64,
    omega: f64,
    shift: f64,
    extra: Vec<(f64, f64, f64)>,
}

const RUGGED_HALF_WIDTH: f64 = 2.0;

pub fn make_rugged_1d(seed: u64, n_modes: usize) -> Result<Rugged1d> {
    if n_modes < 2 {
        return Err(Error::invalid(format!(
            "rugged objective needs n_modes >= 2, got {n_modes}"
        )));
    }
    let b = RUGGED_HALF_WIDTH;
    let period = 2.0 * b / (n_modes as f64 + 1.0);
    let omega = 2.0 * std::f64::consts::PI / period;
    let amplitude = 2.0 * b / omega;
    let mut rng = rng::stream(seed, "rugged_1d");
    let shift = rng.random_range(0.0..period);
    // Secondary slopes sum to at most 0.3 of the envelope slope at the edge.
    let extra = (0..3)
        .map(|_| {
            let w = omega * rng.random_range(0.15..0.45);
            let a = 0.1 * b * rng.random_range(0.5..1.0) / w;
            let phi = rng.random_range(0.0..2.0 * std::f64::consts::PI);
            (a, w, phi)
        })
        .collect();
    Ok(Rugged1d {
        seed,
        n_modes,
        amplitude,
        omega,
        shift,
        extra,
    })
}

impl Objective for Rugged1d {
    fn name(&self) -> String {
        format!("rugged_s{}_m{}", self.seed, self.n_modes)
    }

    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64]) -> f64 {
        let x = x[0];
        let mut v = 0.5 * x * x + self.amplitude * (1.0 - (self.omega * (x - self.shift)).cos());
        for &(a, w, phi) in &self.extra {
            v += a * (w * x + phi).sin();
        }
        v
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let x = x[0];
        let mut g = x + self.amplitude * self.omega * (self.omega * (x - self.shift)).sin();
        for &(a, w, phi) in &self.extra {
            g += a * w * (w * x + phi).cos();
        }
        out[0] = g;
    }

    fn hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let x = x[0];
        let mut h =
            1.0 + self.amplitude * self.omega * self.omega * (self.omega * (x - self.shift)).cos();
        for &(a, w, phi) in &self.extra {
            h -= a * w * w * (w * x + phi).sin();
        }
        Some(DMatrix::from_element(1, 1, h))
    }

    fn domain_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        Some((vec![-RUGGED_HALF_WIDTH], vec![RUGGED_HALF_WIDTH]))
    }

    fn initial_point(&self, rng: &mut Stream) -> Vec<f64> {
        vec![rng.random_range(-RUGGED_HALF_WIDTH..RUGGED_HALF_WIDTH)]
    }
}

/// f(x) = a·x + b.
#[derive(Debug, Clone)]
pub struct Affine {
    pub slope: Vec<f64>,
    pub offset: f64,
}

impl Objective for Affine {
    fn name(&self) -> String {
        format!("affine_n{}", self.slope.len())
    }

    fn dim(&self) -> usize {
        self.slope.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.offset + x.iter().zip(&self.slope).map(|(x, a)| x * a).sum::<f64>()
    }

    fn gradient(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.slope);
    }

    fn hessian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        let n = self.dim();
        Some(DMatrix::zeros(n, n))
    }
}

/// f(x) = sin(k·x) in one dimension; the first eigenfunction of the periodic heat equation.
#[derive(Debug, Clone)]
pub struct SineWave {
    pub k: f64,
}

impl Objective for SineWave {
    fn name(&self) -> String {
        format!("sine_k{}", self.k)
    }

    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.k * x[0]).sin()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.k * (self.k * x[0]).cos();
    }

    fn hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(
            1,
            1,
            -self.k * self.k * (self.k * x[0]).sin(),
        ))
    }

    fn domain_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        Some((vec![0.0], vec![2.0 * std::f64::consts::PI / self.k]))
    }
}

/// f ≡ 0.
#[derive(Debug, Clone)]
pub struct Zero {
    pub n: usize,
}

impl Objective for Zero {
    fn name(&self) -> String {
        format!("zero_n{}", self.n)
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn gradient(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn hessian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::zeros(self.n, self.n))
    }

    fn initial_point(&self, _rng: &mut Stream) -> Vec<f64> {
        vec![0.0; self.n]
    }
}

/// Adds isotropic Gaussian gradient noise of total variance `scale` to another objective.
#[derive(Debug, Clone)]
pub struct Noisy {
    pub inner: ObjectiveRef,
    pub scale: f64,
}

impl Noisy {
    pub fn new(inner: ObjectiveRef, scale: f64) -> Result<Self> {
        if !(scale >= 0.0) {
            return Err(Error::invalid(format!(
                "noise scale must be non-negative, got {scale}"
            )));
        }
        Ok(Noisy { inner, scale })
    }
}

impl Objective for Noisy {
    fn name(&self) -> String {
        format!("{}+noise{}", self.inner.name(), self.scale)
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(x)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.inner.gradient(x, out)
    }

    fn noise_scale(&self) -> f64 {
        self.scale
    }

    fn hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        self.inner.hessian(x)
    }

    fn domain_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        self.inner.domain_box()
    }

    fn initial_point(&self, rng: &mut Stream) -> Vec<f64> {
        self.inner.initial_point(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{dense_hessian, gradient_fd};
    use approx::assert_relative_eq;

    #[test]
    fn quadratic_values() {
        let q = make_quadratic(1.0, vec![], 1).unwrap();
        assert_eq!(q.value(&[2.0]), 2.0);
        assert_eq!(q.gradient_vec(&[2.0]), vec![2.0]);
        let q3 = make_quadratic(2.0, vec![], 3).unwrap();
        let h = q3.hessian(&[0.0; 3]).unwrap();
        assert_eq!(h, DMatrix::identity(3, 3) * 2.0);
    }

    #[test]
    fn quadratic_rejects_nonpositive_curvature() {
        assert!(make_quadratic(0.0, vec![], 1).is_err());
        assert!(make_quadratic(-1.0, vec![], 2).is_err());
    }

    #[test]
    fn double_well_values() {
        let f = make_double_well(1.0).unwrap();
        assert_eq!(f.value(&[1.0]), 0.0);
        assert_eq!(f.value(&[0.0]), 1.0);
        assert_relative_eq!(f.gradient_vec(&[0.5])[0], -1.5, epsilon = 1e-15);
        assert!(make_double_well(0.0).is_err());
    }

    #[test]
    fn rugged_is_deterministic() {
        let a = make_rugged_1d(7, 5).unwrap();
        let b = make_rugged_1d(7, 5).unwrap();
        for i in 0..100 {
            let x = -2.0 + 4.0 * i as f64 / 99.0;
            assert_eq!(a.value(&[x]), b.value(&[x]));
        }
        assert!(make_rugged_1d(7, 1).is_err());
    }

    #[test]
    fn rugged_has_enough_critical_points() {
        // Sign changes of f' on a fine grid: n_modes minima need >= 2 n_modes - 1 changes.
        for seed in [1, 7, 42] {
            let f = make_rugged_1d(seed, 5).unwrap();
            let n = 20_001;
            let mut changes = 0;
            let mut prev = f.gradient_vec(&[-2.0])[0];
            for i in 1..n {
                let x = -2.0 + 4.0 * i as f64 / (n - 1) as f64;
                let g = f.gradient_vec(&[x])[0];
                if g.signum() != prev.signum() {
                    changes += 1;
                }
                prev = g;
            }
            assert!(changes >= 9, "seed {seed}: {changes} sign changes");
        }
    }

    #[test]
    fn rugged_gradient_and_hessian_match_differences() {
        let f = make_rugged_1d(7, 5).unwrap();
        let mut max_rel: f64 = 0.0;
        for i in 0..200 {
            let x = -2.0 + 4.0 * (i as f64 + 0.37) / 200.0;
            let g = f.gradient_vec(&[x])[0];
            let fd = gradient_fd(&f, &[x], 1e-5)[0];
            max_rel = max_rel.max((g - fd).abs() / g.abs().max(1.0));
            let h = f.hessian(&[x]).unwrap()[(0, 0)];
            let hfd = (f.gradient_vec(&[x + 1e-5])[0] - f.gradient_vec(&[x - 1e-5])[0]) / 2e-5;
            assert!((h - hfd).abs() <= 1e-4 * h.abs().max(1.0));
        }
        assert!(max_rel <= 1e-5, "max rel error {max_rel}");
    }

    #[test]
    fn noisy_wrapper_keeps_values() {
        let q: ObjectiveRef = std::sync::Arc::new(make_quadratic(1.0, vec![], 2).unwrap());
        let n = Noisy::new(q.clone(), 0.5).unwrap();
        assert_eq!(n.value(&[1.0, 2.0]), q.value(&[1.0, 2.0]));
        assert_eq!(n.noise_scale(), 0.5);
        assert!(Noisy::new(q, -1.0).is_err());
    }

    #[test]
    fn fd_hessian_agrees_with_exact() {
        let f = make_double_well(1.0).unwrap();
        let exact = f.hessian(&[0.7]).unwrap()[(0, 0)];
        #[derive(Debug)]
        struct NoHess(DoubleWell);
        impl Objective for NoHess {
            fn name(&self) -> String {
                "nohess".into()
            }
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, x: &[f64]) -> f64 {
                self.0.value(x)
            }
            fn gradient(&self, x: &[f64], out: &mut [f64]) {
                self.0.gradient(x, out)
            }
        }
        let fd = dense_hessian(&NoHess(f), &[0.7]).unwrap()[(0, 0)];
        assert_relative_eq!(exact, fd, max_relative = 1e-6);
    }
}
