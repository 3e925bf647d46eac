//! Command-line entry point.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hjsmooth::harness::{parse_config, run_experiment, ExperimentKind, Override};
use hjsmooth::optim::Algorithm;
use hjsmooth::pde::Scheme;

#[derive(Debug, Parser)]
#[command(
    name = "hjsmooth",
    version,
    about = "PDE-smoothed SGD and a Hamilton-Jacobi laboratory"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    /// Experiment to run; may be omitted when the config file sets `experiment.kind`.
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Args)]
struct Global {
    /// TOML or JSON config file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Root seed; repeat i uses seed + i.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory (default runs/<kind>).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Single-threaded execution.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Corpus objective, e.g. double_well_a1, rugged_s7_m5, mlp_h16_n512.
    #[arg(long, global = true, value_name = "NAME")]
    objective: Option<String>,
    /// Number of seeds to run.
    #[arg(long, global = true, value_name = "N")]
    repeat: Option<usize>,
    /// Override any config key, e.g. --set optimizer.gamma0=0.3 (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Skip plot.svg.
    #[arg(long, global = true)]
    no_plot: bool,
}

/// Optimizer settings shared by every algorithm of the run (the `[optimizer]` section).
#[derive(Debug, Args)]
struct Hyper {
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    eta_y: Option<f64>,
    /// Inner steps per outer update.
    #[arg(long = "L", value_name = "L")]
    l: Option<usize>,
    #[arg(long)]
    gamma0: Option<f64>,
    #[arg(long)]
    gamma1: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Elastic-SGD workers.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    beta_inv_ex: Option<f64>,
}

impl Hyper {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let pairs = [
            ("optimizer.eta", self.eta),
            ("optimizer.eta_y", self.eta_y),
            ("optimizer.gamma0", self.gamma0),
            ("optimizer.gamma1", self.gamma1),
            ("optimizer.alpha", self.alpha),
            ("optimizer.delta", self.delta),
            ("optimizer.beta_inv_ex", self.beta_inv_ex),
        ];
        let mut out: Vec<(&'static str, String)> = pairs
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k, v.to_string())))
            .collect();
        out.extend(self.l.map(|v| ("optimizer.L", v.to_string())));
        out.extend(self.workers.map(|v| ("optimizer.n_workers", v.to_string())));
        out
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve an HJ or heat equation on a grid.
    SolvePde {
        #[arg(long)]
        scheme: Option<Scheme>,
        #[arg(long)]
        beta_inv: Option<f64>,
        #[arg(long = "t")]
        t_final: Option<f64>,
        #[arg(long, visible_alias = "grid-n")]
        grid_points: Option<usize>,
    },
    /// Run one optimizer over the repeat seeds.
    Optimize {
        #[arg(long, visible_alias = "algo")]
        algorithm: Option<Algorithm>,
        /// Gradient evaluations per run.
        #[arg(long, conflicts_with = "steps")]
        budget: Option<u64>,
        /// Outer updates per run, in place of --budget.
        #[arg(long)]
        steps: Option<u64>,
        #[command(flatten)]
        hyper: Hyper,
    },
    /// Run several optimizers at the same budget and tabulate final losses.
    Compare {
        #[arg(long, value_delimiter = ',')]
        algorithms: Vec<Algorithm>,
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Compare Entropy-SGD drift estimates with the smoothed gradient as epsilon shrinks.
    VerifyHomogenization,
    /// Paired controlled and uncontrolled gradient-descent paths.
    ControlImprovement,
    /// Harmonic-mean spectral bounds at a minimum and on random matrices.
    Spectrum,
    /// Sample the inner Langevin chain at a fixed outer point.
    InvariantMeasure,
    /// Density evolution under smoothed and raw gradient drifts.
    ReproduceFigure1,
}

impl Command {
    fn kind(&self) -> ExperimentKind {
        match self {
            Command::SolvePde { .. } => ExperimentKind::SolvePde,
            Command::Optimize { .. } => ExperimentKind::Optimize,
            Command::Compare { .. } => ExperimentKind::Compare,
            Command::VerifyHomogenization => ExperimentKind::VerifyHomogenization,
            Command::ControlImprovement => ExperimentKind::ControlImprovement,
            Command::Spectrum => ExperimentKind::Spectrum,
            Command::InvariantMeasure => ExperimentKind::InvariantMeasure,
            Command::ReproduceFigure1 => ExperimentKind::ReproduceFigure1,
        }
    }

    fn overrides(&self) -> Vec<String> {
        let mut o = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                o.push(format!("{k}={v}"));
            }
        };
        match self {
            Command::SolvePde {
                scheme,
                beta_inv,
                t_final,
                grid_points,
            } => {
                push(
                    "pde.scheme",
                    scheme.map(|s| format!("\"{}\"", scheme_key(s))),
                );
                push("pde.beta_inv", beta_inv.map(|v| v.to_string()));
                push("pde.t_final", t_final.map(|v| v.to_string()));
                push("pde.grid_points", grid_points.map(|v| v.to_string()));
            }
            Command::Optimize {
                algorithm,
                budget,
                steps,
                hyper,
            } => {
                push(
                    "experiment.algorithm",
                    algorithm.map(|a| format!("\"{a}\"")),
                );
                push("experiment.budget", budget.map(|v| v.to_string()));
                push("experiment.steps", steps.map(|v| v.to_string()));
                for (k, v) in hyper.overrides() {
                    push(k, Some(v));
                }
            }
            Command::Compare { algorithms, budget } => {
                if !algorithms.is_empty() {
                    let list: Vec<String> = algorithms.iter().map(|a| format!("\"{a}\"")).collect();
                    push(
                        "experiment.algorithms",
                        Some(format!("[{}]", list.join(", "))),
                    );
                }
                push("experiment.budget", budget.map(|v| v.to_string()));
            }
            _ => {}
        }
        o
    }
}

fn scheme_key(s: Scheme) -> &'static str {
    match s {
        Scheme::ColeHopf => "cole_hopf",
        Scheme::HopfLax => "hopf_lax",
        Scheme::MonotoneFd => "monotone_fd",
        Scheme::Heat => "heat",
    }
}

fn build_overrides(cli: &Cli) -> Result<Vec<Override>, hjsmooth::Error> {
    let g = &cli.global;
    let quote = |s: &str| serde_json::to_string(s).expect("string serializes");
    let mut raw = Vec::new();
    if let Some(cmd) = &cli.command {
        raw.push(format!("experiment.kind=\"{}\"", cmd.kind()));
    }
    if let Some(s) = g.seed {
        raw.push(format!("experiment.seed={s}"));
    }
    if let Some(o) = &g.out {
        raw.push(format!("experiment.out={}", quote(&o.to_string_lossy())));
    }
    if let Some(t) = g.threads {
        raw.push(format!("experiment.threads={t}"));
    }
    if g.deterministic {
        raw.push("experiment.deterministic=true".into());
    }
    if let Some(name) = &g.objective {
        raw.push(format!("experiment.objective={}", quote(name)));
    }
    if let Some(r) = g.repeat {
        raw.push(format!("experiment.repeat={r}"));
    }
    if g.no_plot {
        raw.push("experiment.plot=false".into());
    }
    raw.extend(cli.command.iter().flat_map(Command::overrides));
    raw.extend(g.set.iter().cloned());
    raw.iter().map(|s| s.parse()).collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg =
        match build_overrides(&cli).and_then(|o| parse_config(cli.global.config.as_deref(), &o)) {
            Ok(cfg) => cfg,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        };
    match run_experiment(&cfg) {
        Ok(report) => {
            println!(
                "{}: wrote {} files to {}",
                report.kind,
                report.files.len(),
                report.out_dir.display()
            );
            if report.passed {
                println!("all checks passed");
                ExitCode::SUCCESS
            } else {
                for f in &report.failures {
                    eprintln!("FAILED: {f}");
                }
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
