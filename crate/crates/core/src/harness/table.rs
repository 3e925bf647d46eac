//! Final-loss comparison across algorithms at a common gradient budget.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{Algorithm, RunRecord};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub algorithm: Algorithm,
    pub final_loss_mean: f64,
    /// Sample standard deviation over seeds.
    pub final_loss_std: f64,
    pub n_seeds: usize,
    /// Mean effective epochs reached.
    pub effective_epochs: f64,
    /// Mean gradient evaluations actually spent.
    pub grad_evals: f64,
    /// Summed wall time of the runs, in seconds.
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    /// Gradient-evaluation budget shared by every row.
    pub budget: u64,
    /// Sorted by algorithm name.
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    /// Builds the table from the runs of each algorithm.
    pub fn from_runs(budget: u64, runs: &[(Algorithm, Vec<RunRecord>)]) -> Result<Self> {
        let mut rows = Vec::with_capacity(runs.len());
        for (algo, records) in runs {
            if records.is_empty() {
                return Err(Error::invalid(format!("no runs for {algo}")));
            }
            let losses: Vec<f64> = records.iter().map(RunRecord::final_loss).collect();
            let last = |f: fn(&crate::optim::RunRow) -> f64| -> Vec<f64> {
                records
                    .iter()
                    .map(|r| r.rows.last().map_or(0.0, f))
                    .collect()
            };
            rows.push(ComparisonRow {
                algorithm: *algo,
                final_loss_mean: stats::mean(&losses),
                final_loss_std: if losses.len() > 1 {
                    stats::std_dev(&losses)
                } else {
                    0.0
                },
                n_seeds: records.len(),
                effective_epochs: stats::mean(&last(|r| r.effective_epoch)),
                grad_evals: stats::mean(&last(|r| r.grad_evals as f64)),
                wall_time: last(|r| r.wall_clock).iter().sum(),
            });
        }
        rows.sort_by(|a, b| a.algorithm.as_str().cmp(b.algorithm.as_str()));
        Ok(ComparisonTable { budget, rows })
    }

    pub fn row(&self, algo: Algorithm) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.algorithm == algo)
    }

    pub const CSV_HEADER: &'static str =
        "algorithm,final_loss_mean,final_loss_std,n_seeds,effective_epochs,grad_evals";

    /// CSV without wall time, so reruns are byte-identical.
    pub fn write_csv_to(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{:e},{:e},{},{:e},{:e}",
                r.algorithm,
                r.final_loss_mean,
                r.final_loss_std,
                r.n_seeds,
                r.effective_epochs,
                r.grad_evals
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
