//! Paired simulation of gradient descent with and without the optimal control.
//!
//! SGD follows dx = −∇f dt + √β⁻¹ dW. The controlled dynamics subtract
//! α = ∇u, where u solves the backward HJB equation with terminal data V, and
//! see the same Brownian increments. The value u(x₀, 0) equals
//! E[V(x_csgd(T))] + ½E∫‖α‖² ds, which is at most E[V(x_sgd(T))].

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{check_dim, Objective};
use crate::pde::{solve_hjb_backward, GridFunction, GridGeometry, HjbSolution};
use crate::rng::substream;
use crate::stats::{self, Summary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    pub x0: Vec<f64>,
    pub horizon: f64,
    pub beta_inv: f64,
    pub n_paths: usize,
    /// Euler-Maruyama step.
    pub dt: f64,
    /// Paths per independent batch.
    pub batch_size: usize,
    /// Grid points per axis for the HJB solve.
    pub grid_points: usize,
    /// Stored time slices of the HJB solution.
    pub n_snapshots: usize,
    /// Simulation box; defaults to the objective's box.
    pub domain: Option<(Vec<f64>, Vec<f64>)>,
    pub seed: u64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            x0: vec![0.0],
            horizon: 2.0,
            beta_inv: 0.2,
            n_paths: 10_000,
            dt: 1e-3,
            batch_size: 256,
            grid_points: 801,
            n_snapshots: 400,
            domain: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlComparison {
    /// E[V(x_csgd(T))].
    pub terminal_csgd: Summary,
    /// E[V(x_sgd(T))].
    pub terminal_sgd: Summary,
    /// ½E∫‖α‖² ds.
    pub control_energy: Summary,
    /// Paired V(x_sgd) − V(x_csgd).
    pub gain: Summary,
    /// Paired V(x_sgd) − V(x_csgd) − ½∫‖α‖².
    pub slack: Summary,
    /// u(x₀, 0) from the HJB grid.
    pub value_at_start: f64,
    pub n_paths: usize,
    pub n_batches: usize,
    /// Paths that touched the box boundary and were reflected.
    pub exits: usize,
    /// More than 1% of paths were reflected.
    pub valid: bool,
    /// E[V(csgd)] + ½E∫‖α‖² ≤ E[V(sgd)] + 3·stderr.
    pub inequality_holds: bool,
    /// E[V(csgd)] < E[V(sgd)] by more than 3·stderr.
    pub strict_gap_holds: bool,
}

/// Summary whose standard error comes from the spread of batch means.
fn batch_summary(values: &[f64], batch: usize) -> Summary {
    let means: Vec<f64> = values.chunks(batch).map(stats::mean).collect();
    let mut s = Summary::of(values);
    if means.len() >= 2 {
        // Batches of unequal size are weighted equally; only the last one can be short.
        s.stderr = stats::std_err(&means);
    }
    s
}

struct PathOutcome {
    v_csgd: f64,
    v_sgd: f64,
    energy: f64,
    exited: bool,
}

fn reflect(x: &mut [f64], lo: &[f64], hi: &[f64]) -> bool {
    let mut hit = false;
    for k in 0..x.len() {
        // One reflection suffices while a step moves less than the box width.
        if x[k] < lo[k] {
            x[k] = (2.0 * lo[k] - x[k]).min(hi[k]);
            hit = true;
        } else if x[k] > hi[k] {
            x[k] = (2.0 * hi[k] - x[k]).max(lo[k]);
            hit = true;
        }
    }
    hit
}

#[allow(clippy::too_many_arguments)]
fn simulate_batch(
    f: &dyn Objective,
    v: &dyn Objective,
    hjb: &HjbSolution,
    cfg: &ControlConfig,
    lo: &[f64],
    hi: &[f64],
    batch: u64,
    n: usize,
) -> Vec<PathOutcome> {
    let dim = cfg.x0.len();
    let mut rng = substream(cfg.seed, "paths", batch);
    let n_steps = (cfg.horizon / cfg.dt).ceil() as usize;
    let dt = if n_steps == 0 {
        0.0
    } else {
        cfg.horizon / n_steps as f64
    };
    let sd = (cfg.beta_inv * dt).sqrt();
    let mut out = Vec::with_capacity(n);
    let mut g = vec![0.0; dim];
    let mut a = vec![0.0; dim];
    let mut dw = vec![0.0; dim];
    for _ in 0..n {
        let mut xs = cfg.x0.clone();
        let mut xc = cfg.x0.clone();
        let mut energy = 0.0;
        let mut exited = false;
        for step in 0..n_steps {
            let s = step as f64 * dt;
            for w in dw.iter_mut() {
                let e: f64 = StandardNormal.sample(&mut rng);
                *w = sd * e;
            }
            f.gradient(&xs, &mut g);
            for k in 0..dim {
                xs[k] += -g[k] * dt + dw[k];
            }
            f.gradient(&xc, &mut g);
            hjb.control(&xc, s, &mut a);
            for k in 0..dim {
                xc[k] += -(g[k] + a[k]) * dt + dw[k];
            }
            energy += 0.5 * a.iter().map(|v| v * v).sum::<f64>() * dt;
            exited |= reflect(&mut xs, lo, hi);
            exited |= reflect(&mut xc, lo, hi);
        }
        out.push(PathOutcome {
            v_csgd: v.value(&xc),
            v_sgd: v.value(&xs),
            energy,
            exited,
        });
    }
    out
}

/// Runs the paired experiment. Batches run in parallel; results are combined
/// in batch order, so the outcome does not depend on the thread count.
pub fn control_improvement_experiment(
    f: &dyn Objective,
    v: &dyn Objective,
    cfg: &ControlConfig,
) -> Result<ControlComparison> {
    let dim = f.dim();
    check_dim(dim, v.dim())?;
    check_dim(dim, cfg.x0.len())?;
    if !(cfg.horizon >= 0.0) || !(cfg.beta_inv >= 0.0) || !(cfg.dt > 0.0) {
        return Err(Error::invalid(
            "control experiment needs T ≥ 0, beta_inv ≥ 0 and dt > 0",
        ));
    }
    if cfg.n_paths < 2 || cfg.batch_size == 0 {
        return Err(Error::invalid(
            "need at least two paths and a positive batch size",
        ));
    }
    let (lo, hi) = match &cfg.domain {
        Some(b) => b.clone(),
        None => f
            .domain_box()
            .ok_or_else(|| Error::invalid("objective has no box; set `domain`"))?,
    };
    check_dim(dim, lo.len())?;
    let geometry = GridGeometry::new(lo.clone(), hi.clone(), vec![cfg.grid_points; dim])?;
    if !geometry.contains(&cfg.x0) {
        return Err(Error::invalid("x0 lies outside the simulation box"));
    }
    let terminal = GridFunction::sample(v, &geometry)?;
    let hjb = solve_hjb_backward(
        f,
        &terminal,
        cfg.beta_inv,
        cfg.horizon,
        cfg.n_snapshots.max(1),
    )?;
    let value_at_start = hjb.value(&cfg.x0, 0.0);

    let n_batches = cfg.n_paths.div_ceil(cfg.batch_size);
    let batches: Vec<Vec<PathOutcome>> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let n = cfg.batch_size.min(cfg.n_paths - b * cfg.batch_size);
            simulate_batch(f, v, &hjb, cfg, &lo, &hi, b as u64, n)
        })
        .collect();
    let paths: Vec<PathOutcome> = batches.into_iter().flatten().collect();
    let col = |sel: fn(&PathOutcome) -> f64| -> Vec<f64> { paths.iter().map(sel).collect() };
    let v_c = col(|p| p.v_csgd);
    let v_s = col(|p| p.v_sgd);
    let e = col(|p| p.energy);
    let gain_v: Vec<f64> = v_s.iter().zip(&v_c).map(|(s, c)| s - c).collect();
    let slack_v: Vec<f64> = gain_v.iter().zip(&e).map(|(g, e)| g - e).collect();
    let exits = paths.iter().filter(|p| p.exited).count();
    let b = cfg.batch_size;
    let gain = batch_summary(&gain_v, b);
    let slack = batch_summary(&slack_v, b);
    Ok(ControlComparison {
        terminal_csgd: batch_summary(&v_c, b),
        terminal_sgd: batch_summary(&v_s, b),
        control_energy: batch_summary(&e, b),
        inequality_holds: slack.mean + 3.0 * slack.stderr >= 0.0,
        strict_gap_holds: gain.mean > 3.0 * gain.stderr,
        gain,
        slack,
        value_at_start,
        n_paths: cfg.n_paths,
        n_batches,
        exits,
        valid: (exits as f64) <= 0.01 * cfg.n_paths as f64,
    })
}
