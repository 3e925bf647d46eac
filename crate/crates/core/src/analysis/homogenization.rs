//! Two-timescale limit of Entropy-SGD at a frozen outer point.
//!
//! With ε = 1/L the inner chain runs for L steps before the outer variable
//! moves, so the time average γ⁻¹(x − ⟨y⟩) should approach ∇u(x, γ), the
//! gradient of the smoothed loss, as ε → 0.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{check_dim, Objective};
use crate::optim::{step_entropy_sgd, Algorithm, Averaging, OptimizerConfig, OptimizerState};
use crate::pde::{prox_point, solve_viscous_hj_cole_hopf, Boundary, GridGeometry};
use crate::rng::substream;
use crate::stats;

/// Which solution of the HJ equation the estimate is compared with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// Gradient of the viscous solution, from Cole-Hopf quadrature on a grid.
    ColeHopf,
    /// (x − prox)/γ from the Hopf-Lax formula.
    HopfLax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomogenizationConfig {
    pub gamma: f64,
    pub beta_inv: f64,
    pub epsilons: Vec<f64>,
    pub n_seeds: usize,
    /// Inner step size; the fast chain covers L·η_y units of its own time.
    pub eta_y: f64,
    pub reference: Reference,
    pub seed: u64,
}

impl Default for HomogenizationConfig {
    fn default() -> Self {
        HomogenizationConfig {
            gamma: 0.3,
            beta_inv: 1e-3,
            epsilons: vec![1e-1, 1e-2, 1e-3],
            n_seeds: 32,
            eta_y: 0.01,
            reference: Reference::HopfLax,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogenizationRow {
    pub epsilon: f64,
    /// Inner steps per outer update, round(1/ε).
    pub l: usize,
    pub estimate_mean: f64,
    pub estimate_stderr: f64,
    pub reference: f64,
    pub deviation: f64,
    pub relative_error: f64,
    /// Integrated autocorrelation time of the inner chain, in steps.
    pub iat: f64,
    /// The autocorrelation time is not small against the run length.
    pub non_ergodic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogenizationTable {
    pub x: f64,
    pub rows: Vec<HomogenizationRow>,
}

impl HomogenizationTable {
    /// Rows sorted by decreasing ε have non-increasing deviation, up to
    /// `k` combined standard errors.
    pub fn monotone_within(&self, k: f64) -> bool {
        let mut rows: Vec<&HomogenizationRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
        rows.windows(2).all(|w| {
            let slack = k * (w[0].estimate_stderr.powi(2) + w[1].estimate_stderr.powi(2)).sqrt();
            w[1].deviation <= w[0].deviation + slack
        })
    }
}

/// ∂ₓu(x, γ) for a 1D objective.
pub fn reference_gradient(
    f: &dyn Objective,
    x: f64,
    gamma: f64,
    beta_inv: f64,
    kind: Reference,
) -> Result<f64> {
    match kind {
        Reference::HopfLax => Ok(prox_point(f, &[x], gamma)?.gradient[0]),
        Reference::ColeHopf => {
            let (lo, hi) = match f.domain_box() {
                Some((lo, hi)) => (lo[0].min(x - 1.0), hi[0].max(x + 1.0)),
                None => (x - 4.0, x + 4.0),
            };
            let geometry = GridGeometry::uniform_1d(lo, hi, 4097)?;
            let u =
                solve_viscous_hj_cole_hopf(f, beta_inv, gamma, &geometry, Boundary::Extrapolating)?;
            Ok(u.derivative(0).interpolate(&[x]))
        }
    }
}

fn inner_config(cfg: &HomogenizationConfig, x: f64, l: usize) -> OptimizerConfig {
    let mut oc = OptimizerConfig::for_algorithm(Algorithm::EntropySgd);
    oc.l = l;
    oc.eta_y = cfg.eta_y;
    oc.gamma0 = cfg.gamma;
    oc.gamma1 = 0.0;
    // Inner noise √(η_y β⁻¹_ex) with β⁻¹_ex = 2β⁻¹ targets exp(−β(f + |x−y|²/2γ)).
    oc.beta_inv_ex = 2.0 * cfg.beta_inv;
    oc.averaging = Some(Averaging::Uniform);
    oc.x0 = Some(vec![x]);
    oc
}

/// Runs one outer update of Entropy-SGD from x and returns (γ⁻¹(x − ⟨y⟩), y trace).
fn one_estimate(f: &dyn Objective, oc: &OptimizerConfig, seed: u64) -> Result<(f64, Vec<f64>)> {
    let mut state = OptimizerState::new(Algorithm::EntropySgd, f, oc, seed)?;
    let mut trace = Vec::with_capacity(oc.l);
    loop {
        let out = step_entropy_sgd(&mut state, f, oc)?;
        if out.outer_update {
            break;
        }
        trace.push(state.y[0][0]);
    }
    let g = state.last_direction[0];
    if !g.is_finite() {
        return Err(Error::Divergence(
            "inner chain produced a non-finite average".into(),
        ));
    }
    Ok((g, trace))
}

/// Estimates ∇u(x, γ) at each ε over `n_seeds` independent inner chains.
pub fn verify_homogenization(
    f: &dyn Objective,
    x: f64,
    cfg: &HomogenizationConfig,
) -> Result<HomogenizationTable> {
    check_dim(1, f.dim())?;
    if cfg.epsilons.is_empty() || cfg.epsilons.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
        return Err(Error::invalid("epsilons must lie in (0, 1]"));
    }
    if cfg.n_seeds < 2 {
        return Err(Error::invalid(
            "at least two seeds are needed for error bars",
        ));
    }
    if let Some((lo, hi)) = f.domain_box() {
        if x < lo[0] || x > hi[0] {
            return Err(Error::invalid(format!(
                "x = {x} lies outside the objective's box"
            )));
        }
    }
    let reference = reference_gradient(f, x, cfg.gamma, cfg.beta_inv, cfg.reference)?;
    let mut rows = Vec::with_capacity(cfg.epsilons.len());
    for &epsilon in &cfg.epsilons {
        let l = (1.0 / epsilon).round().max(1.0) as usize;
        let oc = inner_config(cfg, x, l);
        let results: Vec<(f64, Vec<f64>)> = (0..cfg.n_seeds as u64)
            .into_par_iter()
            .map(|i| {
                let s: u64 = substream(cfg.seed, "homogenization", i).random();
                one_estimate(f, &oc, s)
            })
            .collect::<Result<_>>()?;
        let estimates: Vec<f64> = results.iter().map(|r| r.0).collect();
        let summary = stats::Summary::of(&estimates);
        let iat = stats::mean(
            &results
                .iter()
                .map(|r| stats::integrated_autocorrelation_time(&r.1))
                .collect::<Vec<_>>(),
        );
        let deviation = (summary.mean - reference).abs();
        rows.push(HomogenizationRow {
            epsilon,
            l,
            estimate_mean: summary.mean,
            estimate_stderr: summary.stderr,
            reference,
            deviation,
            relative_error: if reference != 0.0 {
                deviation / reference.abs()
            } else {
                deviation
            },
            iat,
            non_ergodic: 10.0 * iat > l as f64,
        });
    }
    Ok(HomogenizationTable { x, rows })
}
