//! Runs a configured experiment and writes its artifacts.
//!
//! Every run directory gets `manifest.json` (the resolved config) and
//! `summary.json` (results plus a `passed` flag and the failing checks).
//! Tabular output is CSV; plots are SVG.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{ExperimentConfig, ExperimentKind};
use super::plot::{emit_plot, PlotOptions, Series};
use super::table::ComparisonTable;
use crate::analysis::{
    control_improvement_experiment, harmonic_mean, matrix_spectrum,
    quadratic_invariant_closed_form, reproduce_figure1, sample_invariant_measure_with,
    semiconcavity_report, spectrum_summary, verify_homogenization, ControlConfig,
    HomogenizationConfig, SamplerConfig, SemiconcavityConstants,
};
use crate::error::{Error, Result};
use crate::objective::{lookup, lookup_entry, ObjectiveRef};
use crate::optim::{run, run_with_budget, Algorithm, OptimizerConfig, RunRecord};
use crate::pde::{self, GridFunction, GridGeometry, PdeSolveConfig};
use crate::rng::stream;

/// Rows aimed for in a run CSV when `log_every` is not configured.
const TARGET_ROWS: u64 = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub objective: String,
    /// Optimizer settings after defaults and overrides, by algorithm.
    pub resolved_optimizers: BTreeMap<String, OptimizerConfig>,
    pub seeds: Vec<u64>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub passed: bool,
    pub failures: Vec<String>,
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
    failures: Vec<String>,
    plot: bool,
}

impl Outputs {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let p = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(p, text)?;
        Ok(())
    }

    fn csv(
        &mut self,
        name: &str,
        header: &str,
        rows: impl IntoIterator<Item = String>,
    ) -> Result<()> {
        let p = self.path(name);
        let mut w = std::io::BufWriter::new(std::fs::File::create(p)?);
        writeln!(w, "{header}")?;
        for r in rows {
            writeln!(w, "{r}")?;
        }
        w.flush()?;
        Ok(())
    }

    fn plot(&mut self, series: &[Series], opts: PlotOptions) -> Result<()> {
        if self.plot {
            let p = self.path("plot.svg");
            emit_plot(series, &p, &opts)?;
        }
        Ok(())
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }
}

/// Seeds of the repeats: `seed`, `seed + 1`, ….
pub fn repeat_seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    (0..cfg.experiment.repeat as u64)
        .map(|i| cfg.experiment.seed.wrapping_add(i))
        .collect()
}

/// Optimizer config for `algo`, with `log_every` chosen for about 200 rows
/// when no section sets it.
pub fn resolve_optimizer(cfg: &ExperimentConfig, algo: Algorithm) -> Result<OptimizerConfig> {
    let mut oc = cfg.optimizer_config(algo)?;
    let explicit = cfg.optimizer.log_every.is_some()
        || [
            &cfg.sgd,
            &cfg.entropy_sgd,
            &cfg.hj,
            &cfg.hj2,
            &cfg.heat,
            &cfg.elastic,
        ]
        .iter()
        .any(|o| o.as_ref().is_some_and(|o| o.log_every.is_some()));
    if !explicit {
        let outer = cfg.experiment.budget / oc.evals_per_outer(algo).max(1) as u64;
        oc.log_every = (outer / TARGET_ROWS).max(1) as usize;
    }
    Ok(oc)
}

/// Runs the experiment on a dedicated thread pool and writes its artifacts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let threads = if cfg.experiment.deterministic {
        Some(1)
    } else {
        cfg.experiment.threads
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_inner(cfg))
}

fn run_inner(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir)?;
    let objective = cfg.objective_name();
    let resolved_optimizers = match cfg.experiment.kind {
        ExperimentKind::Optimize | ExperimentKind::Compare => cfg
            .algorithms()
            .into_iter()
            .map(|a| Ok((a.to_string(), resolve_optimizer(cfg, a)?)))
            .collect::<Result<_>>()?,
        _ => BTreeMap::new(),
    };
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        objective: objective.clone(),
        resolved_optimizers,
        seeds: repeat_seeds(cfg),
    };
    let mut out = Outputs {
        dir: dir.clone(),
        files: Vec::new(),
        failures: Vec::new(),
        plot: cfg.experiment.plot,
    };
    out.json("manifest.json", &manifest)?;
    let started = Instant::now();
    let mut summary = match cfg.experiment.kind {
        ExperimentKind::SolvePde => solve_pde(cfg, &objective, &mut out)?,
        ExperimentKind::Optimize | ExperimentKind::Compare => optimize(cfg, &objective, &mut out)?,
        ExperimentKind::VerifyHomogenization => homogenization(cfg, &objective, &mut out)?,
        ExperimentKind::ControlImprovement => control(cfg, &objective, &mut out)?,
        ExperimentKind::Spectrum => spectrum(cfg, &objective, &mut out)?,
        ExperimentKind::InvariantMeasure => invariant(cfg, &objective, &mut out)?,
        ExperimentKind::ReproduceFigure1 => figure1(cfg, &objective, &mut out)?,
    };
    let passed = out.failures.is_empty();
    if let Value::Object(m) = &mut summary {
        m.insert("kind".into(), json!(cfg.experiment.kind));
        m.insert("objective".into(), json!(objective));
        m.insert("passed".into(), json!(passed));
        m.insert("failures".into(), json!(out.failures));
        m.insert("wall_time".into(), json!(started.elapsed().as_secs_f64()));
    }
    out.json("summary.json", &summary)?;
    Ok(ExperimentReport {
        kind: cfg.experiment.kind,
        passed,
        failures: out.failures,
        out_dir: dir,
        files: out.files,
        summary,
    })
}

fn geometry_for(cfg: &ExperimentConfig, f: &ObjectiveRef) -> Result<GridGeometry> {
    let p = &cfg.pde;
    let (lo, hi) = match (&p.lower, &p.upper) {
        (Some(lo), Some(hi)) => (lo.clone(), hi.clone()),
        (None, None) => f.domain_box().ok_or_else(|| {
            Error::Config("objective has no box; set `pde.lower` and `pde.upper`".into())
        })?,
        _ => {
            return Err(Error::Config(
                "`pde.lower` and `pde.upper` must be set together".into(),
            ))
        }
    };
    let n = lo.len();
    GridGeometry::new(lo, hi, vec![p.grid_points; n])
}

fn grid_rows(u: &GridFunction, others: &[&GridFunction]) -> Vec<String> {
    (0..u.values.len())
        .map(|flat| {
            let mut cells: Vec<String> = u
                .geometry
                .point(flat)
                .iter()
                .map(|c| format!("{c:e}"))
                .collect();
            cells.push(format!("{:e}", u.values[flat]));
            cells.extend(others.iter().map(|o| format!("{:e}", o.values[flat])));
            cells.join(",")
        })
        .collect()
}

fn coord_header(dim: usize) -> &'static str {
    if dim == 1 {
        "x"
    } else {
        "x,y"
    }
}

fn solve_pde(cfg: &ExperimentConfig, objective: &str, out: &mut Outputs) -> Result<Value> {
    let f = lookup(objective)?;
    let geometry = geometry_for(cfg, &f)?;
    let p = &cfg.pde;
    let solve_cfg = PdeSolveConfig {
        beta_inv: p.beta_inv,
        t_final: p.t_final,
        dt: p.dt,
        scheme: p.scheme,
        boundary: p.boundary,
    };
    let f0 = GridFunction::sample(f.as_ref(), &geometry)?;
    let u = pde::solve(f.as_ref(), &solve_cfg, &geometry)?;
    out.check(
        u.values.iter().all(|v| v.is_finite()),
        "solution has non-finite values",
    );
    let header = format!("{},u,f", coord_header(geometry.dim()));
    out.csv("solution.csv", &header, grid_rows(&u, &[&f0]))?;
    let mut summary = json!({
        "scheme": p.scheme.to_string(),
        "beta_inv": p.beta_inv,
        "t_final": p.t_final,
        "grid_points": geometry.n_points,
        "u_min": u.min(),
        "u_max": u.max(),
        "argmin": geometry.point(u.argmin()),
    });
    if !p.semiconcavity_times.is_empty() {
        let series: Vec<(f64, GridFunction)> = p
            .semiconcavity_times
            .iter()
            .map(|&t| {
                Ok((
                    t,
                    pde::solve(
                        f.as_ref(),
                        &PdeSolveConfig {
                            t_final: t,
                            ..solve_cfg
                        },
                        &geometry,
                    )?,
                ))
            })
            .collect::<Result<_>>()?;
        let rows = semiconcavity_report(&series, &SemiconcavityConstants::measure(&f0))?;
        let violations: usize = rows.iter().map(|r| r.violations).sum();
        out.check(
            violations == 0,
            format!("{violations} semiconcavity violations"),
        );
        out.csv(
            "semiconcavity.csv",
            "t,axis,max_second_difference,bound,tol",
            rows.iter().flat_map(|r| {
                (0..r.axis_max.len())
                    .map(|k| {
                        format!(
                            "{:e},{k},{:e},{:e},{:e}",
                            r.t, r.axis_max[k], r.axis_bound[k], r.tol
                        )
                    })
                    .collect::<Vec<_>>()
            }),
        )?;
        summary["semiconcavity_violations"] = json!(violations);
        summary["semiconcavity"] = serde_json::to_value(&rows)?;
    }
    if geometry.dim() == 1 {
        let xs = geometry.coords(0);
        out.plot(
            &[
                Series::new("f", xs.clone(), f0.values.clone()),
                Series::new(format!("u(t={})", p.t_final), xs, u.values.clone()),
            ],
            PlotOptions {
                title: format!("{objective}, {} solve", p.scheme),
                y_label: "value".into(),
                ..Default::default()
            },
        )?;
    }
    Ok(summary)
}

fn optimize(cfg: &ExperimentConfig, objective: &str, out: &mut Outputs) -> Result<Value> {
    let f = lookup(objective)?;
    let algos = cfg.algorithms();
    let seeds = repeat_seeds(cfg);
    let budget = cfg.experiment.budget;
    let jobs: Vec<(Algorithm, u64)> = algos
        .iter()
        .flat_map(|a| seeds.iter().map(move |s| (*a, *s)))
        .collect();
    let configs: BTreeMap<Algorithm, OptimizerConfig> = algos
        .iter()
        .map(|a| Ok((*a, resolve_optimizer(cfg, *a)?)))
        .collect::<Result<_>>()?;
    let records: Vec<RunRecord> = jobs
        .par_iter()
        .map(|(a, s)| match cfg.experiment.steps {
            Some(steps) => run(*a, f.as_ref(), &configs[a], *s, steps),
            None => run_with_budget(*a, f.as_ref(), &configs[a], *s, budget),
        })
        .collect::<Result<_>>()?;
    let single = cfg.experiment.kind == ExperimentKind::Optimize;
    for r in &records {
        let name = if single {
            format!("run_{}.csv", r.seed)
        } else {
            format!("run_{}_{}.csv", r.algorithm, r.seed)
        };
        let p = out.path(&name);
        r.write_csv(&p)?;
        out.check(
            !r.aborted,
            format!(
                "{} seed {} aborted: {}",
                r.algorithm,
                r.seed,
                r.abort_reason.clone().unwrap_or_default()
            ),
        );
    }
    let grouped: Vec<(Algorithm, Vec<RunRecord>)> = algos
        .iter()
        .map(|a| {
            (
                *a,
                records
                    .iter()
                    .filter(|r| r.algorithm == *a)
                    .cloned()
                    .collect(),
            )
        })
        .collect();
    let table = ComparisonTable::from_runs(budget, &grouped)?;
    if !single {
        let p = out.path("comparison.csv");
        table.write_csv(&p)?;
    }
    let series: Vec<Series> = grouped
        .iter()
        .map(|(a, runs)| {
            let n = runs.iter().map(|r| r.rows.len()).min().unwrap_or(0);
            let x: Vec<f64> = runs[0].rows[..n]
                .iter()
                .map(|r| r.effective_epoch)
                .collect();
            let y: Vec<f64> = (0..n)
                .map(|i| runs.iter().map(|r| r.rows[i].loss).sum::<f64>() / runs.len() as f64)
                .collect();
            Series::new(a.as_str(), x, y)
        })
        .collect();
    let positive = series.iter().all(|s| s.y.iter().all(|v| *v > 0.0));
    out.plot(
        &series,
        PlotOptions {
            title: format!("{objective}: mean loss over {} seeds", seeds.len()),
            x_label: "effective epochs".into(),
            y_label: "loss".into(),
            log_y: positive,
            ..Default::default()
        },
    )?;
    Ok(json!({
        "budget": budget,
        "seeds": seeds,
        "final_losses": grouped.iter().map(|(a, rs)| (a.to_string(), rs.iter().map(RunRecord::final_loss).collect::<Vec<_>>())).collect::<BTreeMap<_, _>>(),
        "comparison": table,
    }))
}

fn homogenization(cfg: &ExperimentConfig, objective: &str, out: &mut Outputs) -> Result<Value> {
    let f = lookup(objective)?;
    let h = &cfg.homogenization;
    let hc = HomogenizationConfig {
        gamma: h.gamma,
        beta_inv: h.beta_inv,
        epsilons: h.epsilons.clone(),
        n_seeds: h.n_seeds,
        eta_y: h.eta_y,
        reference: h.reference,
        seed: cfg.experiment.seed,
    };
    let tables = h
        .probes
        .iter()
        .map(|&x| verify_homogenization(f.as_ref(), x, &hc))
        .collect::<Result<Vec<_>>>()?;
    let eps_min = h.epsilons.iter().copied().fold(f64::INFINITY, f64::min);
    let mut worst: f64 = 0.0;
    for t in &tables {
        out.check(
            t.monotone_within(2.0),
            format!("deviation not monotone in epsilon at x = {}", t.x),
        );
        for r in t.rows.iter().filter(|r| r.epsilon == eps_min) {
            worst = worst.max(r.relative_error);
            out.check(
                r.relative_error <= h.rel_tol,
                format!("relative error {:.4} at x = {}", r.relative_error, t.x),
            );
        }
    }
    out.csv(
        "table.csv",
        "x,epsilon,L,estimate_mean,estimate_stderr,reference,deviation,relative_error,iat,non_ergodic",
        tables.iter().flat_map(|t| {
            t.rows
                .iter()
                .map(|r| {
                    format!(
                        "{:e},{:e},{},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                        t.x, r.epsilon, r.l, r.estimate_mean, r.estimate_stderr, r.reference, r.deviation,
                        r.relative_error, r.iat, r.non_ergodic
                    )
                })
                .collect::<Vec<_>>()
        }),
    )?;
    let series: Vec<Series> = tables
        .iter()
        .map(|t| {
            Series::new(
                format!("x = {}", t.x),
                t.rows.iter().map(|r| r.epsilon.log10()).collect(),
                t.rows.iter().map(|r| r.relative_error.max(1e-12)).collect(),
            )
        })
        .collect();
    out.plot(
        &series,
        PlotOptions {
            title: "homogenization".into(),
            x_label: "log10 epsilon".into(),
            y_label: "relative error".into(),
            log_y: true,
            ..Default::default()
        },
    )?;
    Ok(json!({ "max_relative_error_at_smallest_epsilon": worst, "tables": tables }))
}

fn control(cfg: &ExperimentConfig, objective: &str, out: &mut Outputs) -> Result<Value> {
    let f = lookup(objective)?;
    let c = &cfg.control;
    let v = match &c.terminal {
        Some(name) => lookup(name)?,
        None => f.clone(),
    };
    let domain = match (&cfg.pde.lower, &cfg.pde.upper) {
        (Some(lo), Some(hi)) => Some((lo.clone(), hi.clone())),
        _ => None,
    };
    let cc = ControlConfig {
        x0: c.x0.clone(),
        horizon: c.horizon,
        beta_inv: c.beta_inv,
        n_paths: c.n_paths,
        dt: c.dt,
        batch_size: c.batch_size,
        grid_points: c.grid_points,
        n_snapshots: c.n_snapshots,
        domain,
        seed: cfg.experiment.seed,
    };
    let r = control_improvement_experiment(f.as_ref(), v.as_ref(), &cc)?;
    out.check(
        r.valid,
        format!("{} of {} paths left the box", r.exits, r.n_paths),
    );
    out.check(
        r.inequality_holds,
        "E[V(csgd)] + control energy exceeds E[V(sgd)] + 3 stderr",
    );
    out.check(
        r.strict_gap_holds,
        "E[V(csgd)] is not below E[V(sgd)] by 3 stderr",
    );
    let line = |name: &str, s: &crate::stats::Summary| {
        format!("{name},{:e},{:e},{:e},{}", s.mean, s.std, s.stderr, s.n)
    };
    out.csv(
        "table.csv",
        "quantity,mean,std,stderr,n",
        [
            line("terminal_csgd", &r.terminal_csgd),
            line("terminal_sgd", &r.terminal_sgd),
            line("control_energy", &r.control_energy),
            line("gain", &r.gain),
            line("slack", &r.slack),
        ],
    )?;
    Ok(json!({ "comparison": r }))
}

fn random_spd(rng: &mut crate::rng::Stream, n: usize) -> DMatrix<f64> {
    let b: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    &b * b.transpose() + DMatrix::<f64>::identity(n, n) * 0.1
}

fn spectrum(cfg: &ExperimentConfig, objective: &str, out: &mut Outputs) -> Result<Value> {
    let s = &cfg.spectrum;
    let entry = lookup_entry(objective)?;
    let x_star = match &s.x_star {
        Some(x) => x.clone(),
        None => entry
            .known_minima
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|m| m.0.clone())
            .ok_or_else(|| {
                Error::Config(format!(
                    "no known minimum for {objective}; set `spectrum.x_star`"
                ))
            })?,
    };
    let summary = spectrum_summary(entry.objective.as_ref(), &x_star, s.t, s.c.as_deref())?;
    out.check(!summary.indefinite, "Hessian at x_star is indefinite");
    out.check(
        summary.diag_bound_holds,
        "HM(eigenvalues) exceeds HM(diagonal) at x_star",
    );
    out.check(
        summary.smoothed_bound_holds,
        "smoothed harmonic-mean bound fails at x_star",
    );

    let mut rng = stream(cfg.experiment.seed, "spectrum_matrices");
    let mut matrix_violations = 0;
    let mut rows = Vec::with_capacity(s.random_matrices);
    for i in 0..s.random_matrices {
        let m = matrix_spectrum(&random_spd(&mut rng, s.random_dim))?;
        if !m.diag_bound_holds {
            matrix_violations += 1;
        }
        rows.push(format!(
            "{i},{:e},{:e},{}",
            m.hm_lambda, m.hm_diag, m.diag_bound_holds
        ));
    }
    out.check(
        matrix_violations == 0,
        format!("{matrix_violations} random matrices violate HM(eigenvalues) <= HM(diagonal)"),
    );
    out.csv("matrices.csv", "index,hm_lambda,hm_diag,holds", rows)?;

    let mut rng = stream(cfg.experiment.seed, "spectrum_vectors");
    let mut vector_violations = 0;
    for _ in 0..s.random_vectors {
        let n = rng.random_range(2..=20);
        let v: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (2.0 * z).exp()
            })
            .collect();
        let hm = harmonic_mean(&v)?;
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min * (1.0 - 1e-12) <= hm && hm <= n as f64 * min * (1.0 + 1e-12)) {
            vector_violations += 1;
        }
    }
    out.check(
        vector_violations == 0,
        format!("{vector_violations} random vectors violate min <= HM <= n min"),
    );
    out.csv(
        "spectrum.csv",
        "index,eigenvalue,diagonal",
        summary
            .eigenvalues
            .iter()
            .zip(&summary.diagonal)
            .enumerate()
            .map(|(i, (l, d))| format!("{i},{l:e},{d:e}")),
    )?;
    Ok(json!({
        "x_star": x_star,
        "summary": summary,
        "random_matrices": s.random_matrices,
        "matrix_violations": matrix_violations,
        "random_vectors": s.random_vectors,
        "vector_violations": vector_violations,
    }))
}

fn invariant(cfg: &ExperimentConfig, objective: &str, out: &mut Outputs) -> Result<Value> {
    let f = lookup(objective)?;
    let s = &cfg.invariant;
    let x = s.x.clone().unwrap_or_else(|| vec![2.0; f.dim()]);
    let sc = SamplerConfig {
        gamma: s.gamma,
        beta_inv: s.beta_inv,
        eta_y: s.eta_y,
        n_steps: s.n_steps,
        burn_in: s.burn_in,
    };
    let est = sample_invariant_measure_with(f.as_ref(), &x, &sc, cfg.experiment.seed)?;
    let mut summary = json!({ "x": x, "estimate": est });
    let closed = match (objective.starts_with("quadratic_"), f.hessian(&x)) {
        (true, Some(q)) if s.beta_inv > 0.0 => {
            let p = f.gradient_vec(&vec![0.0; f.dim()]);
            Some(quadratic_invariant_closed_form(
                &q,
                &p,
                &x,
                s.gamma,
                1.0 / s.beta_inv,
            )?)
        }
        _ => None,
    };
    let n = x.len();
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = format!(
            "{i},{:e},{:e},{:e},{:e}",
            est.mean[i],
            est.mean_stderr[i],
            est.covariance[(i, i)],
            est.variance_stderr[i]
        );
        if let Some(c) = &closed {
            row.push_str(&format!(
                ",{:e},{:e},{:e},{:e}",
                c.exact.mean[i],
                c.exact.covariance[(i, i)],
                c.printed.mean[i],
                c.printed.covariance[(i, i)]
            ));
            out.check(
                (est.mean[i] - c.exact.mean[i]).abs() <= 3.0 * est.mean_stderr[i],
                format!("mean component {i} is more than 3 stderr from the closed form"),
            );
            out.check(
                (est.covariance[(i, i)] - c.exact.covariance[(i, i)]).abs()
                    <= 3.0 * est.variance_stderr[i],
                format!("variance component {i} is more than 3 stderr from the closed form"),
            );
        }
        rows.push(row);
    }
    let header = if closed.is_some() {
        "component,mean,mean_stderr,variance,variance_stderr,closed_mean,closed_variance,printed_mean,printed_variance"
    } else {
        "component,mean,mean_stderr,variance,variance_stderr"
    };
    out.csv("table.csv", header, rows)?;
    if let Some(c) = closed {
        summary["closed_form"] = serde_json::to_value(c)?;
    }
    Ok(summary)
}

fn figure1(cfg: &ExperimentConfig, objective: &str, out: &mut Outputs) -> Result<Value> {
    let mut fc = cfg.figure1.clone();
    fc.objective = objective.to_string();
    let r = reproduce_figure1(&fc)?;
    out.check(
        r.ordered,
        format!(
            "mass ordering failed: viscous {:.4}, hopf-lax {:.4}, sgd {:.4}",
            r.mass_viscous, r.mass_hopf_lax, r.mass_sgd
        ),
    );
    out.csv(
        "densities.csv",
        "x,initial,viscous,hopf_lax,sgd",
        grid_rows(&r.initial, &[&r.viscous, &r.hopf_lax, &r.sgd]),
    )?;
    let xs = r.initial.geometry.coords(0);
    out.plot(
        &[
            Series::new("initial", xs.clone(), r.initial.values.clone()),
            Series::new("viscous HJ", xs.clone(), r.viscous.values.clone()),
            Series::new("Hopf-Lax", xs.clone(), r.hopf_lax.values.clone()),
            Series::new("gradient", xs, r.sgd.values.clone()),
        ],
        PlotOptions {
            title: format!("{objective}: terminal densities"),
            y_label: "density".into(),
            ..Default::default()
        },
    )?;
    Ok(json!({
        "x_star": r.x_star,
        "mass_viscous": r.mass_viscous,
        "mass_hopf_lax": r.mass_hopf_lax,
        "mass_sgd": r.mass_sgd,
        "min_gap": r.min_gap,
        "config": fc,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeat_seeds_are_consecutive() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Optimize);
        cfg.experiment.seed = 10;
        cfg.experiment.repeat = 3;
        assert_eq!(repeat_seeds(&cfg), vec![10, 11, 12]);
    }

    #[test]
    fn log_every_defaults_to_about_200_rows() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Optimize);
        cfg.experiment.budget = 100_000;
        assert_eq!(
            resolve_optimizer(&cfg, Algorithm::Sgd).unwrap().log_every,
            500
        );
        cfg.optimizer.log_every = Some(3);
        assert_eq!(
            resolve_optimizer(&cfg, Algorithm::Sgd).unwrap().log_every,
            3
        );
    }
}
