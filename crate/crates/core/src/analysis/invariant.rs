//! The stationary measure of the inner Langevin chain at a frozen outer point x,
//!
//! ```text
//! ρ(y; x) ∝ exp(−β [ f(y) + ‖x − y‖²/(2γ) ]),
//! ```
//!
//! sampled by Euler-Maruyama and, for quadratic f, in closed form.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{check_dim, dense_hessian, Objective, DENSE_HESSIAN_LIMIT};
use crate::rng::stream;
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantMeasureEstimate {
    pub mean: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub n_samples: usize,
    /// Largest integrated autocorrelation time over the components, in steps.
    pub autocorrelation_time: f64,
    /// Standard error of each mean component, scaled by its autocorrelation time.
    pub mean_stderr: Vec<f64>,
    /// Standard error of each diagonal covariance entry.
    pub variance_stderr: Vec<f64>,
    pub eta_y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub gamma: f64,
    pub beta_inv: f64,
    /// Step size; picked from the local curvature when absent.
    pub eta_y: Option<f64>,
    pub n_steps: usize,
    pub burn_in: usize,
}

/// Samples kept for autocorrelation analysis; longer chains are thinned.
const MAX_STORED: usize = 1 << 20;
const DIVERGENCE_RADIUS: f64 = 1e6;

/// Step size 0.005/λ with λ = γ⁻¹ + max(0, largest Hessian eigenvalue at x).
pub fn default_step(f: &dyn Objective, x: &[f64], gamma: f64) -> f64 {
    let mut lambda = 1.0 / gamma;
    if f.dim() <= DENSE_HESSIAN_LIMIT {
        if let Ok(h) = dense_hessian(f, x) {
            let top = h
                .symmetric_eigenvalues()
                .iter()
                .copied()
                .fold(0.0f64, f64::max);
            lambda += top;
        }
    }
    0.005 / lambda
}

/// Sampler with the default step size.
pub fn sample_invariant_measure(
    f: &dyn Objective,
    x: &[f64],
    gamma: f64,
    beta_inv: f64,
    n_steps: usize,
    burn_in: usize,
    seed: u64,
) -> Result<InvariantMeasureEstimate> {
    let cfg = SamplerConfig {
        gamma,
        beta_inv,
        eta_y: None,
        n_steps,
        burn_in,
    };
    sample_invariant_measure_with(f, x, &cfg, seed)
}

/// y ← y − η[∇f(y) + (y − x)/γ] + √(2ηβ⁻¹)·ξ, whose stationary law is ρ(·; x).
pub fn sample_invariant_measure_with(
    f: &dyn Objective,
    x: &[f64],
    cfg: &SamplerConfig,
    seed: u64,
) -> Result<InvariantMeasureEstimate> {
    check_dim(f.dim(), x.len())?;
    if !(cfg.gamma > 0.0) || !(cfg.beta_inv >= 0.0) {
        return Err(Error::invalid("sampler needs gamma > 0 and beta_inv ≥ 0"));
    }
    if cfg.burn_in >= cfg.n_steps {
        return Err(Error::invalid("burn_in must be smaller than n_steps"));
    }
    let eta = cfg.eta_y.unwrap_or_else(|| default_step(f, x, cfg.gamma));
    if !(eta > 0.0) {
        return Err(Error::invalid(format!("eta_y must be positive, got {eta}")));
    }
    let n = x.len();
    let kept = cfg.n_steps - cfg.burn_in;
    let thin = kept.div_ceil(MAX_STORED).max(1);
    let mut rng = stream(seed, "invariant");
    let noise = (2.0 * eta * cfg.beta_inv).sqrt();
    let mut y = x.to_vec();
    let mut g = vec![0.0; n];
    let mut mean = vec![0.0; n];
    let mut m2 = DMatrix::<f64>::zeros(n, n);
    let mut stored: Vec<Vec<f64>> = vec![Vec::with_capacity(kept / thin + 1); n];
    let mut count = 0usize;
    let mut delta = vec![0.0; n];
    for step in 0..cfg.n_steps {
        f.gradient(&y, &mut g);
        for i in 0..n {
            let xi: f64 = StandardNormal.sample(&mut rng);
            y[i] -= eta * (g[i] + (y[i] - x[i]) / cfg.gamma);
            y[i] += noise * xi;
        }
        if step % 1024 == 0 {
            let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(r <= DIVERGENCE_RADIUS) {
                return Err(Error::Divergence(format!(
                    "|y| = {r:e} after {step} steps; gamma may exceed the local convexity scale"
                )));
            }
        }
        if step < cfg.burn_in {
            continue;
        }
        // Welford update of mean and co-moment.
        count += 1;
        for i in 0..n {
            delta[i] = y[i] - mean[i];
            mean[i] += delta[i] / count as f64;
        }
        for i in 0..n {
            for j in 0..=i {
                m2[(i, j)] += delta[i] * (y[j] - mean[j]);
            }
        }
        if (step - cfg.burn_in).is_multiple_of(thin) {
            for i in 0..n {
                stored[i].push(y[i]);
            }
        }
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::Divergence(format!("component {i} is not finite")));
    }
    let denom = (count.max(2) - 1) as f64;
    let mut covariance = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            covariance[(i, j)] = m2[(i, j)] / denom;
            covariance[(j, i)] = covariance[(i, j)];
        }
    }
    let mut tau_max: f64 = 1.0;
    let mut mean_stderr = Vec::with_capacity(n);
    let mut variance_stderr = Vec::with_capacity(n);
    for i in 0..n {
        let (se, tau) = stats::correlated_std_err(&stored[i]);
        mean_stderr.push(se);
        tau_max = tau_max.max(tau * thin as f64);
        let m = stats::mean(&stored[i]);
        let sq: Vec<f64> = stored[i].iter().map(|v| (v - m).powi(2)).collect();
        variance_stderr.push(stats::correlated_std_err(&sq).0);
    }
    Ok(InvariantMeasureEstimate {
        mean,
        covariance,
        n_samples: count,
        autocorrelation_time: tau_max,
        mean_stderr,
        variance_stderr,
        eta_y: eta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mean: Vec<f64>,
    pub covariance: DMatrix<f64>,
}

/// Gaussian parameters of ρ(·; x) for f(y) = ½yᵀQy + pᵀy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticInvariant {
    /// Precision β(Q + γ⁻¹I), mean x − (Q + γ⁻¹I)⁻¹∇f(x). This is the law the sampler targets.
    pub exact: Gaussian,
    /// γI − γ²Q in place of (Q + γ⁻¹I)⁻¹, valid for γ‖Q‖ < 1.
    pub exact_neumann: Option<Gaussian>,
    /// The variant with Σ = (Q + γI)⁻¹ and μ = x − Σ∇f(x), scaled by β⁻¹.
    pub printed: Gaussian,
    /// Its expansion γ⁻¹I − γ⁻²Q, valid for γ > ‖Q‖.
    pub printed_neumann: Option<Gaussian>,
}

fn gaussian_from(
    x: &DVector<f64>,
    grad: &DVector<f64>,
    sigma: DMatrix<f64>,
    beta: f64,
) -> Gaussian {
    let mean = x - &sigma * grad;
    Gaussian {
        mean: mean.iter().copied().collect(),
        covariance: sigma / beta,
    }
}

pub fn quadratic_invariant_closed_form(
    q: &DMatrix<f64>,
    p: &[f64],
    x: &[f64],
    gamma: f64,
    beta: f64,
) -> Result<QuadraticInvariant> {
    let n = q.nrows();
    if q.ncols() != n {
        return Err(Error::invalid("Q must be square"));
    }
    check_dim(n, p.len())?;
    check_dim(n, x.len())?;
    if !(gamma > 0.0) || !(beta > 0.0) {
        return Err(Error::invalid("gamma and beta must be positive"));
    }
    if (q - q.transpose()).abs().max() > 1e-12 * (1.0 + q.abs().max()) {
        return Err(Error::invalid("Q must be symmetric"));
    }
    if q.clone().cholesky().is_none() {
        return Err(Error::invalid("Q must be positive definite"));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let xv = DVector::from_column_slice(x);
    let grad = q * &xv + DVector::from_column_slice(p);
    let norm_q = q
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));

    let sigma = (q + &eye / gamma)
        .cholesky()
        .ok_or_else(|| Error::Singular("Q + I/γ is not positive definite".into()))?
        .inverse();
    let exact = gaussian_from(&xv, &grad, sigma, beta);
    let exact_neumann = (gamma * norm_q < 1.0)
        .then(|| gaussian_from(&xv, &grad, &eye * gamma - q * (gamma * gamma), beta));

    let sigma_p = (q + &eye * gamma)
        .cholesky()
        .ok_or_else(|| Error::Singular("Q + γI is not positive definite".into()))?
        .inverse();
    let printed = gaussian_from(&xv, &grad, sigma_p, beta);
    let printed_neumann = (gamma > norm_q)
        .then(|| gaussian_from(&xv, &grad, &eye / gamma - q / (gamma * gamma), beta));

    Ok(QuadraticInvariant {
        exact,
        exact_neumann,
        printed,
        printed_neumann,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{make_quadratic, Zero};

    #[test]
    fn closed_form_examples() {
        let q = DMatrix::identity(2, 2);
        let r = quadratic_invariant_closed_form(&q, &[0.0, 0.0], &[2.0, 0.0], 1.0, 1.0).unwrap();
        assert!((r.exact.mean[0] - 1.0).abs() < 1e-15 && r.exact.mean[1].abs() < 1e-15);
        assert!((r.exact.covariance[(0, 0)] - 0.5).abs() < 1e-15);
        assert!(r.exact.covariance[(0, 1)].abs() < 1e-15);
        let r0 = quadratic_invariant_closed_form(&q, &[0.0, 0.0], &[0.0, 0.0], 0.3, 2.0).unwrap();
        assert!(r0.exact.mean.iter().all(|m| *m == 0.0));
        assert!(r.printed_neumann.is_none() && r.exact_neumann.is_none());
    }

    #[test]
    fn neumann_variants_approximate_their_inverses() {
        let q = DMatrix::from_row_slice(2, 2, &[0.2, 0.05, 0.05, 0.1]);
        let small =
            quadratic_invariant_closed_form(&q, &[0.1, 0.0], &[1.0, 1.0], 0.05, 1.0).unwrap();
        let e = small.exact_neumann.unwrap();
        assert!((&e.covariance - &small.exact.covariance).abs().max() < 1e-4);
        let large =
            quadratic_invariant_closed_form(&q, &[0.1, 0.0], &[1.0, 1.0], 20.0, 1.0).unwrap();
        let p = large.printed_neumann.unwrap();
        assert!((&p.covariance - &large.printed.covariance).abs().max() < 1e-4);
    }

    #[test]
    fn rejects_indefinite_q() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(quadratic_invariant_closed_form(&q, &[0.0, 0.0], &[0.0, 0.0], 1.0, 1.0).is_err());
    }

    #[test]
    fn sampler_matches_quadratic() {
        let f = make_quadratic(1.0, vec![], 1).unwrap();
        let est = sample_invariant_measure(&f, &[2.0], 1.0, 1.0, 400_000, 10_000, 5).unwrap();
        assert!((est.mean[0] - 1.0).abs() <= 4.0 * est.mean_stderr[0]);
        assert!((est.covariance[(0, 0)] - 0.5).abs() <= 4.0 * est.variance_stderr[0] + 0.005);
    }

    #[test]
    fn flat_objective_gives_ornstein_uhlenbeck() {
        let f = Zero { n: 2 };
        let cfg = SamplerConfig {
            gamma: 0.4,
            beta_inv: 0.5,
            eta_y: Some(0.01),
            n_steps: 2_000_000,
            burn_in: 10_000,
        };
        let est = sample_invariant_measure_with(&f, &[0.5, -0.5], &cfg, 2).unwrap();
        for i in 0..2 {
            assert!((est.covariance[(i, i)] / (0.5 * 0.4) - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn divergence_detected() {
        // Concave f with γ far beyond the convexity margin.
        let f = make_quadratic(1.0, vec![], 1).unwrap();
        #[derive(Debug)]
        struct Neg(crate::objective::Quadratic);
        impl Objective for Neg {
            fn name(&self) -> String {
                "neg".into()
            }
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, x: &[f64]) -> f64 {
                -self.0.value(x)
            }
            fn gradient(&self, x: &[f64], out: &mut [f64]) {
                self.0.gradient(x, out);
                out[0] = -out[0];
            }
        }
        let cfg = SamplerConfig {
            gamma: 10.0,
            beta_inv: 0.1,
            eta_y: Some(0.1),
            n_steps: 100_000,
            burn_in: 10,
        };
        let err = sample_invariant_measure_with(&Neg(f), &[1.0], &cfg, 0).unwrap_err();
        assert!(matches!(err, Error::Divergence(_)));
    }
}
