//! Driving an optimizer for a fixed number of outer updates and recording the trajectory.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{Algorithm, OptimizerConfig};
use super::steps::{step_fn, wrap_momentum, OptimizerState};
use crate::error::{Error, Result};
use crate::objective::{norm, Objective};

/// One logged outer update.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRow {
    /// Outer update index (0 is the starting point).
    pub k: u64,
    pub grad_evals: u64,
    /// Gradient evaluations divided by the steps in one pass over the data.
    pub effective_epoch: f64,
    pub loss: f64,
    pub grad_norm: f64,
    pub gamma: f64,
    pub control_energy: f64,
    /// Seconds since the run started. Not part of equality or the CSV output,
    /// so replays compare equal.
    pub wall_clock: f64,
}

impl PartialEq for RunRow {
    fn eq(&self, o: &Self) -> bool {
        self.k == o.k
            && self.grad_evals == o.grad_evals
            && self.effective_epoch.to_bits() == o.effective_epoch.to_bits()
            && self.loss.to_bits() == o.loss.to_bits()
            && self.grad_norm.to_bits() == o.grad_norm.to_bits()
            && self.gamma.to_bits() == o.gamma.to_bits()
            && self.control_energy.to_bits() == o.control_energy.to_bits()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub objective: String,
    pub seed: u64,
    pub config: OptimizerConfig,
    pub rows: Vec<RunRow>,
    pub terminal_x: Vec<f64>,
    /// Set when the loss became non-finite; `rows` then ends at the last finite value.
    pub aborted: bool,
    pub abort_reason: Option<String>,
}

impl RunRecord {
    pub fn final_loss(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.loss)
    }

    pub const CSV_HEADER: &'static str =
        "k,grad_evals,effective_epoch,loss,grad_norm,gamma,control_energy";

    pub fn write_csv_to(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{:e},{:e},{:e},{:e},{:e}",
                r.k,
                r.grad_evals,
                r.effective_epoch,
                r.loss,
                r.grad_norm,
                r.gamma,
                r.control_energy
            )?;
        }
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv_to(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

fn row(state: &OptimizerState, f: &dyn Objective, started: Instant) -> RunRow {
    RunRow {
        k: state.outer,
        grad_evals: state.grad_evals,
        effective_epoch: state.grad_evals as f64 / f.steps_per_epoch() as f64,
        loss: f.value(&state.x),
        grad_norm: norm(&f.gradient_vec(&state.x)),
        gamma: state.gamma,
        control_energy: state.control_energy,
        wall_clock: started.elapsed().as_secs_f64(),
    }
}

/// Runs `algo` for `n_outer` outer updates from the seed's initial point.
///
/// Momentum is applied when `cfg.delta > 0`. Rows are logged at the start and
/// every `cfg.log_every` outer updates (always including the last).
pub fn run(
    algo: Algorithm,
    f: &dyn Objective,
    cfg: &OptimizerConfig,
    seed: u64,
    n_outer: u64,
) -> Result<RunRecord> {
    let started = Instant::now();
    let mut state = OptimizerState::new(algo, f, cfg, seed)?;
    let mut step = wrap_momentum(step_fn(algo), cfg.delta)?;
    let mut record = RunRecord {
        algorithm: algo,
        objective: f.name(),
        seed,
        config: cfg.clone(),
        rows: vec![row(&state, f, started)],
        terminal_x: Vec::new(),
        aborted: false,
        abort_reason: None,
    };
    while state.outer < n_outer {
        let out = step(&mut state, f, cfg)?;
        if !out.outer_update {
            continue;
        }
        if state.x.iter().any(|v| !v.is_finite()) {
            record.aborted = true;
            record.abort_reason = Some(format!(
                "iterate became non-finite at outer step {}",
                state.outer
            ));
            break;
        }
        if state.outer % cfg.log_every as u64 == 0 || state.outer == n_outer {
            let r = row(&state, f, started);
            if !r.loss.is_finite() {
                record.aborted = true;
                record.abort_reason = Some(format!(
                    "loss became {} at outer step {}",
                    r.loss, state.outer
                ));
                break;
            }
            record.rows.push(r);
        }
    }
    record.terminal_x = state.x;
    Ok(record)
}

/// Runs `algo` until `grad_evals` minibatch gradients have been spent (rounded
/// down to whole outer updates).
pub fn run_with_budget(
    algo: Algorithm,
    f: &dyn Objective,
    cfg: &OptimizerConfig,
    seed: u64,
    grad_evals: u64,
) -> Result<RunRecord> {
    let per = cfg.evals_per_outer(algo) as u64;
    if per == 0 || grad_evals < per {
        return Err(Error::invalid(format!(
            "budget {grad_evals} is below one outer update ({per})"
        )));
    }
    run(algo, f, cfg, seed, grad_evals / per)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{make_quadratic, Objective};

    #[derive(Debug)]
    struct Blowup;

    impl Objective for Blowup {
        fn name(&self) -> String {
            "blowup".into()
        }
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &[f64]) -> f64 {
            (x[0] * x[0]).exp()
        }
        fn gradient(&self, x: &[f64], out: &mut [f64]) {
            out[0] = 2.0 * x[0] * (x[0] * x[0]).exp();
        }
    }

    #[test]
    fn replay_is_identical() {
        let f = make_quadratic(1.0, vec![0.3, -0.1], 2).unwrap();
        let cfg = OptimizerConfig {
            beta_inv_ex: 1e-3,
            ..OptimizerConfig::for_algorithm(Algorithm::EntropySgd)
        };
        let a = run(Algorithm::EntropySgd, &f, &cfg, 11, 50).unwrap();
        let b = run(Algorithm::EntropySgd, &f, &cfg, 11, 50).unwrap();
        assert_eq!(a, b);
        assert!(a.rows.windows(2).all(|w| w[0].k < w[1].k));
    }

    #[test]
    fn sgd_converges_on_quadratic() {
        let f = make_quadratic(1.0, vec![], 3).unwrap();
        let cfg = OptimizerConfig {
            delta: 0.0,
            ..OptimizerConfig::for_algorithm(Algorithm::Sgd)
        };
        let r = run(Algorithm::Sgd, &f, &cfg, 0, 500).unwrap();
        assert!(r.final_loss() <= 1e-6);
    }

    #[test]
    fn nan_aborts_with_partial_record() {
        let cfg = OptimizerConfig {
            x0: Some(vec![2.0]),
            eta: 1.0,
            delta: 0.0,
            ..OptimizerConfig::for_algorithm(Algorithm::Sgd)
        };
        let r = run(Algorithm::Sgd, &Blowup, &cfg, 0, 100).unwrap();
        assert!(r.aborted);
        assert!(r.rows.iter().all(|row| row.loss.is_finite()));
    }

    #[test]
    fn outer_rows_scale_with_l() {
        let f = make_quadratic(1.0, vec![], 1).unwrap();
        let sgd = OptimizerConfig::for_algorithm(Algorithm::Sgd);
        let esgd = OptimizerConfig::for_algorithm(Algorithm::EntropySgd);
        let a = run_with_budget(Algorithm::Sgd, &f, &sgd, 0, 2000).unwrap();
        let b = run_with_budget(Algorithm::EntropySgd, &f, &esgd, 0, 2000).unwrap();
        assert_eq!(a.rows.len() - 1, 20 * (b.rows.len() - 1));
        assert_eq!(
            a.rows.last().unwrap().grad_evals,
            b.rows.last().unwrap().grad_evals
        );
    }
}
