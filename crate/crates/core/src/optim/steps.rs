//! Optimizer state and the per-step update rules.
//!
//! Every call performs one inner step (one minibatch gradient per worker).
//! When the inner counter reaches a multiple of L the outer variable moves:
//! x ← z − η·g, where z is the anchor the inner dynamics were centered on and
//! g the algorithm's estimate of the smoothed gradient. Without momentum the
//! anchor is simply x.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::config::{
    eta_at, gamma_schedule, Algorithm, Averaging, ElasticCoupling, OptimizerConfig,
};
use crate::error::{Error, Result};
use crate::objective::{check_dim, Objective};
use crate::rng::{stream, substream, Stream};

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub algorithm: Algorithm,
    /// Outer iterate.
    pub x: Vec<f64>,
    /// Anchor of the inner dynamics (the momentum lookahead point).
    pub z: Vec<f64>,
    /// Outer iterate before the latest outer update.
    pub x_prev: Vec<f64>,
    /// Inner iterates, one per worker.
    pub y: Vec<Vec<f64>>,
    /// ⟨y⟩, or ⟨ȳ⟩ for Elastic-SGD.
    pub y_avg: Vec<f64>,
    /// Inner steps taken.
    pub k: u64,
    /// Outer updates taken.
    pub outer: u64,
    /// Minibatch gradient evaluations, summed over workers.
    pub grad_evals: u64,
    /// Per-worker streams for minibatches and inner noise.
    pub worker_rngs: Vec<Stream>,
    /// γ used by the latest step.
    pub gamma: f64,
    /// Running ½Σ‖g‖²η over outer updates of the smoothing algorithms.
    pub control_energy: f64,
    /// g from the latest outer update.
    pub last_direction: Vec<f64>,
    accumulator: Vec<f64>,
    averaged: usize,
}

impl OptimizerState {
    /// Fresh state at `cfg.x0`, or at the objective's initial point drawn from
    /// the seed's `init` stream.
    pub fn new(
        algorithm: Algorithm,
        f: &dyn Objective,
        cfg: &OptimizerConfig,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate(algorithm)?;
        let n = f.dim();
        let x0 = match &cfg.x0 {
            Some(x) => {
                check_dim(n, x.len())?;
                x.clone()
            }
            None => f.initial_point(&mut stream(seed, "init")),
        };
        let workers = if algorithm == Algorithm::Elastic {
            cfg.n_workers
        } else {
            1
        };
        let mut s = OptimizerState {
            algorithm,
            x: x0.clone(),
            z: x0.clone(),
            x_prev: x0.clone(),
            y: vec![x0.clone(); workers],
            y_avg: x0,
            k: 0,
            outer: 0,
            grad_evals: 0,
            worker_rngs: (0..workers as u64)
                .map(|i| substream(seed, "worker", i))
                .collect(),
            gamma: if algorithm == Algorithm::Sgd {
                0.0
            } else {
                gamma_schedule(0, cfg, n)
            },
            control_energy: 0.0,
            last_direction: vec![0.0; n],
            accumulator: vec![0.0; n],
            averaged: 0,
        };
        s.reset_inner();
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Restarts the inner dynamics at the anchor z.
    pub fn reset_inner(&mut self) {
        let start = if self.algorithm == Algorithm::Hj2 {
            vec![0.0; self.dim()]
        } else {
            self.z.clone()
        };
        for y in &mut self.y {
            y.clone_from(&start);
        }
        self.y_avg.clone_from(&self.z);
        self.accumulator.iter_mut().for_each(|v| *v = 0.0);
        self.averaged = 0;
    }

    fn effective_epoch(&self, f: &dyn Objective) -> f64 {
        self.grad_evals as f64 / f.steps_per_epoch() as f64
    }

    fn average_in(&mut self, rule: Averaging, v: &[f64]) {
        self.averaged += 1;
        match rule {
            Averaging::Exponential(a) => {
                for (m, y) in self.y_avg.iter_mut().zip(v) {
                    *m = a * *m + (1.0 - a) * y;
                }
            }
            Averaging::Last => self.y_avg.copy_from_slice(v),
            Averaging::Uniform => {
                let w = 1.0 / self.averaged as f64;
                for (m, y) in self.y_avg.iter_mut().zip(v) {
                    *m += w * (y - *m);
                }
            }
        }
    }

    /// x ← z − η·g and restart the inner dynamics at the new x.
    fn outer_update(&mut self, g: Vec<f64>, eta: f64, counts_as_control: bool) {
        self.x_prev.clone_from(&self.x);
        for i in 0..self.dim() {
            self.x[i] = self.z[i] - eta * g[i];
        }
        self.z.clone_from(&self.x);
        if counts_as_control {
            self.control_energy += 0.5 * g.iter().map(|v| v * v).sum::<f64>() * eta;
        }
        self.last_direction = g;
        self.outer += 1;
        self.reset_inner();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub outer_update: bool,
}

fn gaussian(rng: &mut Stream) -> f64 {
    StandardNormal.sample(rng)
}

/// One Euler-Maruyama step of y ← y − η_y[∇f_mb(y) + (y − anchor)/γ] + √(η_y β⁻¹_ex)·ε.
fn coupled_inner_step(
    f: &dyn Objective,
    y: &mut [f64],
    anchor: &[f64],
    gamma: f64,
    cfg: &OptimizerConfig,
    rng: &mut Stream,
) {
    let mut g = vec![0.0; y.len()];
    f.stochastic_gradient(y, rng, &mut g);
    let noise = (cfg.eta_y * cfg.beta_inv_ex).sqrt();
    for i in 0..y.len() {
        y[i] -= cfg.eta_y * (g[i] + (y[i] - anchor[i]) / gamma);
        if noise > 0.0 {
            y[i] += noise * gaussian(rng);
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::invalid(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    Ok(())
}

/// x ← x − η∇f_mb(x) + √(η β⁻¹_ex)·ε.
pub fn step_sgd(
    state: &mut OptimizerState,
    f: &dyn Objective,
    cfg: &OptimizerConfig,
) -> Result<StepOutcome> {
    check_dim(f.dim(), state.dim())?;
    let eta = eta_at(cfg, state.effective_epoch(f));
    let n = state.dim();
    let mut g = vec![0.0; n];
    let anchor = state.z.clone();
    f.stochastic_gradient(&anchor, &mut state.worker_rngs[0], &mut g);
    state.grad_evals += 1;
    state.k += 1;
    state.gamma = 0.0;
    state.outer_update(g, eta, false);
    let noise = (eta * cfg.beta_inv_ex).sqrt();
    if noise > 0.0 {
        for i in 0..n {
            state.x[i] += noise * gaussian(&mut state.worker_rngs[0]);
        }
        state.z.clone_from(&state.x);
    }
    Ok(StepOutcome { outer_update: true })
}

fn coupled_step(
    state: &mut OptimizerState,
    f: &dyn Objective,
    cfg: &OptimizerConfig,
    averaging: Averaging,
) -> Result<StepOutcome> {
    check_dim(f.dim(), state.dim())?;
    let gamma = gamma_schedule(state.k, cfg, state.dim());
    check_gamma(gamma)?;
    state.gamma = gamma;
    let eta = eta_at(cfg, state.effective_epoch(f));
    let anchor = state.z.clone();
    coupled_inner_step(
        f,
        &mut state.y[0],
        &anchor,
        gamma,
        cfg,
        &mut state.worker_rngs[0],
    );
    state.grad_evals += 1;
    let y = state.y[0].clone();
    state.average_in(averaging, &y);
    state.k += 1;
    if state.k.is_multiple_of(cfg.l as u64) {
        let g = state
            .z
            .iter()
            .zip(&state.y_avg)
            .map(|(z, m)| (z - m) / gamma)
            .collect();
        state.outer_update(g, eta, true);
        return Ok(StepOutcome { outer_update: true });
    }
    Ok(StepOutcome {
        outer_update: false,
    })
}

/// Entropy-SGD: Langevin inner chain with exponential averaging of y.
pub fn step_entropy_sgd(
    state: &mut OptimizerState,
    f: &dyn Objective,
    cfg: &OptimizerConfig,
) -> Result<StepOutcome> {
    coupled_step(state, f, cfg, cfg.averaging_for(Algorithm::EntropySgd))
}

/// Non-viscous HJ: the same inner chain, using the last inner iterate.
pub fn step_hj(
    state: &mut OptimizerState,
    f: &dyn Objective,
    cfg: &OptimizerConfig,
) -> Result<StepOutcome> {
    coupled_step(state, f, cfg, cfg.averaging_for(Algorithm::Hj))
}

/// HJ in displacement form: y ← (1 − η_y/γ)y + η_y∇f_mb(x − y); every L steps
/// x ← x − η∇f_mb(x − y) and y ← 0.
pub fn step_hj2(
    state: &mut OptimizerState,
    f: &dyn Objective,
    cfg: &OptimizerConfig,
) -> Result<StepOutcome> {
    check_dim(f.dim(), state.dim())?;
    let gamma = gamma_schedule(state.k, cfg, state.dim());
    check_gamma(gamma)?;
    state.gamma = gamma;
    let eta = eta_at(cfg, state.effective_epoch(f));
    let n = state.dim();
    let shifted =
        |s: &OptimizerState| -> Vec<f64> { s.z.iter().zip(&s.y[0]).map(|(a, b)| a - b).collect() };
    let mut g = vec![0.0; n];
    let p = shifted(state);
    f.stochastic_gradient(&p, &mut state.worker_rngs[0], &mut g);
    state.grad_evals += 1;
    let decay = 1.0 - cfg.eta_y / gamma;
    for i in 0..n {
        state.y[0][i] = decay * state.y[0][i] + cfg.eta_y * g[i];
    }
    state.k += 1;
    if state.k.is_multiple_of(cfg.l as u64) {
        let p = shifted(state);
        let mut g = vec![0.0; n];
        f.stochastic_gradient(&p, &mut state.worker_rngs[0], &mut g);
        state.grad_evals += 1;
        state.outer_update(g, eta, true);
        return Ok(StepOutcome { outer_update: true });
    }
    Ok(StepOutcome {
        outer_update: false,
    })
}

/// Heat smoothing: x ← x − (η/L)Σ_i ∇f_mb(x + εᵢ), εᵢ ~ N(0, γI).
pub fn step_heat(
    state: &mut OptimizerState,
    f: &dyn Objective,
    cfg: &OptimizerConfig,
) -> Result<StepOutcome> {
    check_dim(f.dim(), state.dim())?;
    let gamma = gamma_schedule(state.k, cfg, state.dim());
    check_gamma(gamma)?;
    state.gamma = gamma;
    let eta = eta_at(cfg, state.effective_epoch(f));
    let n = state.dim();
    let sd = gamma.sqrt();
    let rng = &mut state.worker_rngs[0];
    let p: Vec<f64> = state.z.iter().map(|z| z + sd * gaussian(rng)).collect();
    let mut g = vec![0.0; n];
    f.stochastic_gradient(&p, rng, &mut g);
    state.grad_evals += 1;
    for i in 0..n {
        state.accumulator[i] += g[i];
    }
    state.k += 1;
    if state.k.is_multiple_of(cfg.l as u64) {
        let g = state.accumulator.iter().map(|v| v / cfg.l as f64).collect();
        state.outer_update(g, eta, true);
        return Ok(StepOutcome { outer_update: true });
    }
    Ok(StepOutcome {
        outer_update: false,
    })
}

/// Elastic-SGD: n_p coupled Langevin workers; the center moves toward the
/// exponential average of the worker mean ȳ every L steps.
pub fn step_elastic(
    state: &mut OptimizerState,
    f: &dyn Objective,
    cfg: &OptimizerConfig,
) -> Result<StepOutcome> {
    check_dim(f.dim(), state.dim())?;
    if state.y.is_empty() {
        return Err(Error::invalid("elastic needs at least one worker"));
    }
    let gamma = gamma_schedule(state.k, cfg, state.dim());
    check_gamma(gamma)?;
    state.gamma = gamma;
    let eta = eta_at(cfg, state.effective_epoch(f));
    let n = state.dim();
    let workers = state.y.len();
    let mean = |ys: &[Vec<f64>]| -> Vec<f64> {
        // Offsets from the first worker keep identical workers exact.
        (0..n)
            .map(|i| ys[0][i] + ys.iter().map(|y| y[i] - ys[0][i]).sum::<f64>() / workers as f64)
            .collect()
    };
    let anchor = match cfg.coupling {
        ElasticCoupling::Center => state.z.clone(),
        ElasticCoupling::WorkerMean => mean(&state.y),
    };
    let work =
        |(y, rng): (&mut Vec<f64>, &mut Stream)| coupled_inner_step(f, y, &anchor, gamma, cfg, rng);
    if cfg.parallel_workers {
        state
            .y
            .par_iter_mut()
            .zip(state.worker_rngs.par_iter_mut())
            .for_each(work);
    } else {
        state
            .y
            .iter_mut()
            .zip(state.worker_rngs.iter_mut())
            .for_each(work);
    }
    state.grad_evals += workers as u64;
    let ybar = mean(&state.y);
    state.average_in(cfg.averaging_for(Algorithm::Elastic), &ybar);
    state.k += 1;
    if state.k.is_multiple_of(cfg.l as u64) {
        let g = state
            .z
            .iter()
            .zip(&state.y_avg)
            .map(|(z, m)| (z - m) / gamma)
            .collect();
        state.outer_update(g, eta, true);
        return Ok(StepOutcome { outer_update: true });
    }
    Ok(StepOutcome {
        outer_update: false,
    })
}

pub type StepFn = Box<
    dyn FnMut(&mut OptimizerState, &dyn Objective, &OptimizerConfig) -> Result<StepOutcome> + Send,
>;

/// The unwrapped update rule for `algo`.
pub fn step_fn(algo: Algorithm) -> StepFn {
    match algo {
        Algorithm::Sgd => Box::new(step_sgd),
        Algorithm::EntropySgd => Box::new(step_entropy_sgd),
        Algorithm::Hj => Box::new(step_hj),
        Algorithm::Hj2 => Box::new(step_hj2),
        Algorithm::Heat => Box::new(step_heat),
        Algorithm::Elastic => Box::new(step_elastic),
    }
}

/// Nesterov lookahead at outer updates: after x moves, the next gradient
/// estimate is taken around z = x + δ(x − x_prev). δ = 0 leaves `step` unchanged.
pub fn wrap_momentum(mut step: StepFn, delta: f64) -> Result<StepFn> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::invalid(format!(
            "momentum must lie in [0, 1), got {delta}"
        )));
    }
    Ok(Box::new(
        move |state: &mut OptimizerState, f: &dyn Objective, cfg: &OptimizerConfig| {
            let out = step(state, f, cfg)?;
            if out.outer_update && delta > 0.0 {
                for i in 0..state.dim() {
                    state.z[i] = state.x[i] + delta * (state.x[i] - state.x_prev[i]);
                }
                state.reset_inner();
            }
            Ok(out)
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{make_quadratic, Affine, Zero};
    use crate::stats;

    fn cfg(algo: Algorithm) -> OptimizerConfig {
        OptimizerConfig {
            delta: 0.0,
            ..OptimizerConfig::for_algorithm(algo)
        }
    }

    #[test]
    fn sgd_contracts_quadratic() {
        let f = make_quadratic(1.0, vec![], 1).unwrap();
        let c = OptimizerConfig {
            x0: Some(vec![1.0]),
            beta_inv_ex: 0.0,
            ..cfg(Algorithm::Sgd)
        };
        let mut s = OptimizerState::new(Algorithm::Sgd, &f, &c, 0).unwrap();
        step_sgd(&mut s, &f, &c).unwrap();
        assert!((s.x[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let f = Zero { n: 2 };
        for algo in Algorithm::ALL {
            let mut c = cfg(algo);
            c.beta_inv_ex = 0.0;
            c.x0 = Some(vec![0.3, -0.7]);
            let mut s = OptimizerState::new(algo, &f, &c, 1).unwrap();
            let mut step = step_fn(algo);
            for _ in 0..100 {
                step(&mut s, &f, &c).unwrap();
            }
            assert_eq!(s.x, vec![0.3, -0.7], "{algo}");
        }
    }

    #[test]
    fn sgd_noise_variance() {
        let f = crate::objective::make_double_well(1.0).unwrap();
        let c = OptimizerConfig {
            x0: Some(vec![1.0]),
            beta_inv_ex: 0.01,
            ..cfg(Algorithm::Sgd)
        };
        let xs: Vec<f64> = (0..10_000)
            .map(|seed| {
                let mut s = OptimizerState::new(Algorithm::Sgd, &f, &c, seed).unwrap();
                step_sgd(&mut s, &f, &c).unwrap();
                s.x[0]
            })
            .collect();
        let v = stats::variance(&xs);
        assert!((v / (0.1 * 0.01) - 1.0).abs() <= 0.05, "{v}");
    }

    #[test]
    fn heat_affine_update_is_exact() {
        let f = Affine {
            slope: vec![3.0],
            offset: 0.0,
        };
        let c = OptimizerConfig {
            x0: Some(vec![0.5]),
            gamma0: 0.7,
            ..cfg(Algorithm::Heat)
        };
        let mut s = OptimizerState::new(Algorithm::Heat, &f, &c, 3).unwrap();
        for _ in 0..c.l {
            step_heat(&mut s, &f, &c).unwrap();
        }
        assert!((s.x[0] - (0.5 - 0.1 * 3.0)).abs() < 1e-14);
    }

    #[test]
    fn heat_with_vanishing_gamma_is_sgd() {
        let f = make_quadratic(1.0, vec![], 1).unwrap();
        let c = OptimizerConfig {
            x0: Some(vec![0.8]),
            gamma0: 1e-12,
            ..cfg(Algorithm::Heat)
        };
        let mut s = OptimizerState::new(Algorithm::Heat, &f, &c, 3).unwrap();
        for _ in 0..c.l {
            step_heat(&mut s, &f, &c).unwrap();
        }
        assert!((s.x[0] - 0.8 * 0.9).abs() <= 1e-6);
    }

    #[test]
    fn elastic_with_shared_streams_is_entropy_sgd() {
        let f = make_quadratic(1.0, vec![0.2], 1).unwrap();
        let base = OptimizerConfig {
            x0: Some(vec![1.5]),
            beta_inv_ex: 0.05,
            ..cfg(Algorithm::EntropySgd)
        };
        let ec = OptimizerConfig {
            n_workers: 8,
            ..base.clone()
        };
        let mut a = OptimizerState::new(Algorithm::EntropySgd, &f, &base, 9).unwrap();
        let mut b = OptimizerState::new(Algorithm::Elastic, &f, &ec, 9).unwrap();
        let r0 = a.worker_rngs[0].clone();
        b.worker_rngs.iter_mut().for_each(|r| *r = r0.clone());
        for _ in 0..200 {
            step_entropy_sgd(&mut a, &f, &base).unwrap();
            step_elastic(&mut b, &f, &ec).unwrap();
        }
        assert_eq!(a.x, b.x);
    }

    #[test]
    fn hj_variants_move_toward_minimum() {
        let f = make_quadratic(1.0, vec![], 1).unwrap();
        for algo in [Algorithm::Hj, Algorithm::Hj2] {
            let c = OptimizerConfig {
                x0: Some(vec![1.0]),
                gamma0: 0.5,
                gamma1: 0.0,
                eta_y: 0.05,
                l: 50,
                ..cfg(algo)
            };
            let mut s = OptimizerState::new(algo, &f, &c, 0).unwrap();
            let mut step = step_fn(algo);
            while !step(&mut s, &f, &c).unwrap().outer_update {}
            assert!(s.last_direction[0] > 0.0, "{algo}");
            // The prox gradient x/(1 + γ) at x = 1, γ = 0.5.
            assert!(
                (s.last_direction[0] - 1.0 / 1.5).abs() < 0.05,
                "{algo}: {}",
                s.last_direction[0]
            );
        }
    }

    #[test]
    fn zero_momentum_matches_unwrapped() {
        let f = make_quadratic(1.0, vec![0.1], 1).unwrap();
        let c = OptimizerConfig {
            x0: Some(vec![2.0]),
            beta_inv_ex: 0.01,
            ..cfg(Algorithm::EntropySgd)
        };
        let mut a = OptimizerState::new(Algorithm::EntropySgd, &f, &c, 4).unwrap();
        let mut b = a.clone();
        let mut plain = step_fn(Algorithm::EntropySgd);
        let mut wrapped = wrap_momentum(step_fn(Algorithm::EntropySgd), 0.0).unwrap();
        for _ in 0..500 {
            plain(&mut a, &f, &c).unwrap();
            wrapped(&mut b, &f, &c).unwrap();
        }
        assert_eq!(a.x, b.x);
        assert!(wrap_momentum(step_fn(Algorithm::Sgd), 1.0).is_err());
    }
}
