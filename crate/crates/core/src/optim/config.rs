//! Hyperparameters shared by all update rules.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Sgd,
    EntropySgd,
    Hj,
    Hj2,
    Heat,
    Elastic,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Sgd,
        Algorithm::EntropySgd,
        Algorithm::Hj,
        Algorithm::Hj2,
        Algorithm::Heat,
        Algorithm::Elastic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Sgd => "sgd",
            Algorithm::EntropySgd => "entropy_sgd",
            Algorithm::Hj => "hj",
            Algorithm::Hj2 => "hj2",
            Algorithm::Heat => "heat",
            Algorithm::Elastic => "elastic",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s.replace('-', "_"))
            .ok_or_else(|| Error::invalid(format!("unknown algorithm `{s}`")))
    }
}

/// How ⟨y⟩ is formed from the inner iterates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "alpha")]
pub enum Averaging {
    /// ⟨y⟩ ← α⟨y⟩ + (1 − α)y.
    Exponential(f64),
    /// ⟨y⟩ is the last inner iterate.
    Last,
    /// ⟨y⟩ is the arithmetic mean of the inner iterates since the last outer update.
    Uniform,
}

/// What each Elastic-SGD worker is pulled toward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElasticCoupling {
    /// The center variable x; identical workers then reproduce Entropy-SGD.
    #[default]
    Center,
    /// The current worker mean ȳ.
    WorkerMean,
}

/// Step-size drop: η is divided by `factor` every `every_epochs` effective epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Anneal {
    pub factor: f64,
    pub every_epochs: f64,
}

impl Default for Anneal {
    fn default() -> Self {
        Anneal {
            factor: 5.0,
            every_epochs: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Outer step η.
    pub eta: f64,
    /// Inner step η_y.
    pub eta_y: f64,
    /// Inner steps per outer update.
    #[serde(rename = "L", alias = "l")]
    pub l: usize,
    pub gamma0: f64,
    pub gamma1: f64,
    /// Divide γ₀ by the dimension.
    pub gamma_per_dim: bool,
    pub beta_inv_ex: f64,
    /// Exponential averaging weight α.
    pub alpha: f64,
    /// Overrides the algorithm's averaging rule when set.
    pub averaging: Option<Averaging>,
    /// Momentum δ; zero disables the wrapper.
    pub delta: f64,
    pub n_workers: usize,
    pub coupling: ElasticCoupling,
    /// Run Elastic-SGD workers on the rayon pool. Output is identical either way.
    pub parallel_workers: bool,
    pub anneal: Option<Anneal>,
    /// Starting point; the objective's default when absent.
    pub x0: Option<Vec<f64>>,
    /// Record a row every this many outer updates.
    pub log_every: usize,
}

impl OptimizerConfig {
    /// Defaults for `algo`: η_y = 0.1, α = 0.75, δ = 0.9, γ₁ = 1e-3, with
    /// L = 20 and β⁻¹_ex = 1e-8 for Entropy-SGD, L = 5 and β⁻¹_ex = 0 for HJ.
    pub fn for_algorithm(algo: Algorithm) -> Self {
        let (l, beta_inv_ex) = match algo {
            Algorithm::Sgd => (1, 0.0),
            Algorithm::EntropySgd | Algorithm::Elastic => (20, 1e-8),
            Algorithm::Hj | Algorithm::Hj2 => (5, 0.0),
            Algorithm::Heat => (20, 0.0),
        };
        OptimizerConfig {
            eta: 0.1,
            eta_y: 0.1,
            l,
            gamma0: 0.1,
            gamma1: 1e-3,
            gamma_per_dim: false,
            beta_inv_ex,
            alpha: 0.75,
            averaging: None,
            delta: 0.9,
            n_workers: if algo == Algorithm::Elastic { 4 } else { 1 },
            coupling: ElasticCoupling::Center,
            parallel_workers: false,
            anneal: None,
            x0: None,
            log_every: 1,
        }
    }

    pub fn validate(&self, algo: Algorithm) -> Result<()> {
        let bad = |what: &str| Err(Error::invalid(what.to_string()));
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return bad("eta must be positive");
        }
        if !(self.eta_y > 0.0) || !self.eta_y.is_finite() {
            return bad("eta_y must be positive");
        }
        if self.l == 0 {
            return bad("L must be at least 1");
        }
        if !(self.gamma0 > 0.0) || !self.gamma0.is_finite() {
            return bad("gamma0 must be positive");
        }
        if !(0.0..1.0).contains(&self.gamma1) {
            return bad("gamma1 must lie in [0, 1)");
        }
        if !(self.beta_inv_ex >= 0.0) || !self.beta_inv_ex.is_finite() {
            return bad("beta_inv_ex must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must lie in [0, 1]");
        }
        if let Some(Averaging::Exponential(a)) = self.averaging {
            if !(0.0..=1.0).contains(&a) {
                return bad("averaging weight must lie in [0, 1]");
            }
        }
        if !(0.0..1.0).contains(&self.delta) {
            return bad("delta must lie in [0, 1)");
        }
        if self.n_workers == 0 {
            return bad("n_workers must be at least 1");
        }
        if algo != Algorithm::Elastic && self.n_workers != 1 {
            return bad("n_workers applies to elastic only");
        }
        if let Some(a) = self.anneal {
            if !(a.factor >= 1.0) || !(a.every_epochs > 0.0) {
                return bad("anneal needs factor ≥ 1 and a positive period");
            }
        }
        if self.log_every == 0 {
            return bad("log_every must be at least 1");
        }
        Ok(())
    }

    /// Averaging rule in effect for `algo`.
    pub fn averaging_for(&self, algo: Algorithm) -> Averaging {
        self.averaging.unwrap_or(match algo {
            Algorithm::Hj => Averaging::Last,
            _ => Averaging::Exponential(self.alpha),
        })
    }

    /// Inner steps between outer updates for `algo` (always 1 for SGD).
    pub fn inner_steps(&self, algo: Algorithm) -> usize {
        if algo == Algorithm::Sgd {
            1
        } else {
            self.l
        }
    }

    /// Minibatch gradient evaluations per outer update.
    pub fn evals_per_outer(&self, algo: Algorithm) -> usize {
        match algo {
            Algorithm::Sgd => 1,
            Algorithm::Hj2 => self.l + 1,
            Algorithm::Elastic => self.l * self.n_workers,
            _ => self.l,
        }
    }
}

/// γ(k) = γ₀(1 − γ₁)^⌊k/L⌋, optionally with γ₀ divided by `dim`.
pub fn gamma_schedule(k: u64, cfg: &OptimizerConfig, dim: usize) -> f64 {
    let g0 = if cfg.gamma_per_dim {
        cfg.gamma0 / dim as f64
    } else {
        cfg.gamma0
    };
    let epochs = (k / cfg.l.max(1) as u64) as f64;
    g0 * (1.0 - cfg.gamma1).powf(epochs)
}

/// η after annealing at the given effective epoch.
pub fn eta_at(cfg: &OptimizerConfig, effective_epoch: f64) -> f64 {
    match cfg.anneal {
        Some(a) => {
            cfg.eta
                / a.factor
                    .powi((effective_epoch / a.every_epochs).floor() as i32)
        }
        None => cfg.eta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_values() {
        let cfg = OptimizerConfig {
            gamma0: 0.1,
            gamma1: 1e-3,
            l: 20,
            ..OptimizerConfig::for_algorithm(Algorithm::EntropySgd)
        };
        assert_eq!(gamma_schedule(0, &cfg, 1), 0.1);
        assert!((gamma_schedule(2000, &cfg, 1) - 0.1 * 0.999f64.powi(100)).abs() < 1e-15);
        assert!((gamma_schedule(2019, &cfg, 1) - 0.090479).abs() < 1e-6);
        let mut prev = f64::INFINITY;
        for k in 0..5000 {
            let g = gamma_schedule(k, &cfg, 1);
            assert!(g > 0.0 && g <= prev);
            prev = g;
        }
    }

    #[test]
    fn defaults() {
        let e = OptimizerConfig::for_algorithm(Algorithm::EntropySgd);
        assert_eq!(
            (e.eta_y, e.alpha, e.delta, e.gamma1, e.l),
            (0.1, 0.75, 0.9, 1e-3, 20)
        );
        assert_eq!(e.beta_inv_ex, 1e-8);
        let h = OptimizerConfig::for_algorithm(Algorithm::Hj);
        assert_eq!((h.l, h.beta_inv_ex), (5, 0.0));
        assert_eq!(h.averaging_for(Algorithm::Hj), Averaging::Last);
    }

    #[test]
    fn validation() {
        let mut c = OptimizerConfig::for_algorithm(Algorithm::Elastic);
        c.n_workers = 0;
        assert!(c.validate(Algorithm::Elastic).is_err());
        let mut c = OptimizerConfig::for_algorithm(Algorithm::EntropySgd);
        c.gamma0 = 0.0;
        assert!(c.validate(Algorithm::EntropySgd).is_err());
        assert!(Algorithm::from_str("hj2").is_ok());
        assert!(Algorithm::from_str("adam").is_err());
    }

    #[test]
    fn anneal_drops_eta() {
        let mut c = OptimizerConfig::for_algorithm(Algorithm::Sgd);
        c.anneal = Some(Anneal::default());
        assert_eq!(eta_at(&c, 2.9), 0.1);
        assert!((eta_at(&c, 3.0) - 0.02).abs() < 1e-15);
    }
}
