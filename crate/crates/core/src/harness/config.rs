//! Experiment configuration.
//!
//! A config is a set of flat sections. The file may be TOML
//! (`[section]` headers with `key = value` lines) or the equivalent JSON
//! object of objects. Every section except `[experiment]` is optional and
//! every key has a default; unknown keys are rejected by name.
//!
//! ```toml
//! [experiment]
//! kind = "compare"
//! objective = "mlp_h16_n512"
//! repeat = 6
//! algorithms = ["sgd", "entropy_sgd", "hj"]
//! budget = 200000
//!
//! [optimizer]      # applies to every algorithm
//! eta = 0.1
//!
//! [hj]             # applies to HJ only, after [optimizer]
//! gamma0 = 1.0
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::{Figure1Config, Reference};
use crate::error::{Error, Result};
use crate::optim::{Algorithm, Anneal, Averaging, ElasticCoupling, OptimizerConfig};
use crate::pde::{Boundary, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SolvePde,
    Optimize,
    Compare,
    VerifyHomogenization,
    ControlImprovement,
    Spectrum,
    InvariantMeasure,
    ReproduceFigure1,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::SolvePde,
        ExperimentKind::Optimize,
        ExperimentKind::Compare,
        ExperimentKind::VerifyHomogenization,
        ExperimentKind::ControlImprovement,
        ExperimentKind::Spectrum,
        ExperimentKind::InvariantMeasure,
        ExperimentKind::ReproduceFigure1,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::SolvePde => "solve_pde",
            ExperimentKind::Optimize => "optimize",
            ExperimentKind::Compare => "compare",
            ExperimentKind::VerifyHomogenization => "verify_homogenization",
            ExperimentKind::ControlImprovement => "control_improvement",
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::InvariantMeasure => "invariant_measure",
            ExperimentKind::ReproduceFigure1 => "reproduce_figure1",
        }
    }

    /// Objective used when the config names none.
    pub fn default_objective(self) -> &'static str {
        match self {
            ExperimentKind::SolvePde | ExperimentKind::ReproduceFigure1 => "rugged_s7_m5",
            ExperimentKind::Optimize | ExperimentKind::Compare => "mlp_h16_n512",
            ExperimentKind::VerifyHomogenization | ExperimentKind::ControlImprovement => {
                "double_well_a1"
            }
            ExperimentKind::Spectrum => "quadratic_c1_n2",
            ExperimentKind::InvariantMeasure => "quadratic_c1_n1",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| Error::Config(format!("unknown experiment kind `{s}`")))
    }
}

fn default_repeat() -> usize {
    1
}

fn default_budget() -> u64 {
    20_000
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Sgd, Algorithm::EntropySgd, Algorithm::Hj]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    /// Corpus name; each kind has its own default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<String>,
    #[serde(default)]
    pub seed: u64,
    /// Repeat i runs with seed `seed + i`.
    #[serde(default = "default_repeat")]
    pub repeat: usize,
    /// Output directory; `runs/<kind>` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub deterministic: bool,
    /// Algorithm for `optimize`; the first of `algorithms` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<Algorithm>,
    /// Algorithms for `compare`.
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    /// Minibatch gradient evaluations per run.
    #[serde(default = "default_budget")]
    pub budget: u64,
    /// Outer updates per run for `optimize`; replaces `budget` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    /// Write `plot.svg` where the experiment has a natural plot.
    #[serde(default = "default_true")]
    pub plot: bool,
}

fn default_true() -> bool {
    true
}

impl ExperimentSection {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentSection {
            kind,
            objective: None,
            seed: 0,
            repeat: 1,
            out: None,
            threads: None,
            deterministic: false,
            algorithm: None,
            algorithms: default_algorithms(),
            budget: default_budget(),
            steps: None,
            plot: true,
        }
    }
}

/// Optimizer keys; unset keys keep the algorithm's default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_y: Option<f64>,
    #[serde(
        default,
        rename = "L",
        alias = "l",
        skip_serializing_if = "Option::is_none"
    )]
    pub l: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_per_dim: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_inv_ex: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub averaging: Option<Averaging>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<ElasticCoupling>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallel_workers: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anneal: Option<Anneal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_every: Option<usize>,
}

impl OptimizerOverrides {
    pub fn apply(&self, cfg: &mut OptimizerConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { cfg.$field = v.clone(); })*
            };
        }
        set!(
            eta,
            eta_y,
            l,
            gamma0,
            gamma1,
            gamma_per_dim,
            beta_inv_ex,
            alpha,
            delta,
            n_workers,
            coupling,
            parallel_workers,
            log_every
        );
        if self.averaging.is_some() {
            cfg.averaging = self.averaging;
        }
        if self.anneal.is_some() {
            cfg.anneal = self.anneal;
        }
        if self.x0.is_some() {
            cfg.x0 = self.x0.clone();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdeSection {
    pub scheme: Scheme,
    pub beta_inv: f64,
    pub t_final: f64,
    pub grid_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub boundary: Boundary,
    /// Box corners; the objective's box when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    /// Extra solve times checked against the semiconcavity bounds.
    pub semiconcavity_times: Vec<f64>,
}

impl Default for PdeSection {
    fn default() -> Self {
        PdeSection {
            scheme: Scheme::ColeHopf,
            beta_inv: 0.1,
            t_final: 0.5,
            grid_points: 1025,
            dt: None,
            boundary: Boundary::Extrapolating,
            lower: None,
            upper: None,
            semiconcavity_times: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HomogenizationSection {
    pub probes: Vec<f64>,
    pub gamma: f64,
    pub beta_inv: f64,
    pub epsilons: Vec<f64>,
    pub n_seeds: usize,
    pub eta_y: f64,
    pub reference: Reference,
    /// Largest relative error allowed at the smallest ε.
    pub rel_tol: f64,
}

impl Default for HomogenizationSection {
    fn default() -> Self {
        HomogenizationSection {
            probes: vec![-1.8, -1.5, -1.3, -0.7, -0.4, 0.4, 0.7, 1.3, 1.5, 1.8],
            gamma: 0.3,
            beta_inv: 1e-3,
            epsilons: vec![1e-1, 1e-2, 1e-3],
            n_seeds: 32,
            eta_y: 0.01,
            reference: Reference::HopfLax,
            rel_tol: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlSection {
    pub x0: Vec<f64>,
    pub horizon: f64,
    pub beta_inv: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub batch_size: usize,
    pub grid_points: usize,
    pub n_snapshots: usize,
    /// Corpus name of the terminal cost V; the objective itself when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terminal: Option<String>,
}

impl Default for ControlSection {
    fn default() -> Self {
        ControlSection {
            x0: vec![0.0],
            horizon: 2.0,
            beta_inv: 0.2,
            n_paths: 10_000,
            dt: 1e-3,
            batch_size: 256,
            grid_points: 801,
            n_snapshots: 400,
            terminal: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InvariantSection {
    /// Frozen outer point; 2 in every coordinate when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    pub gamma: f64,
    pub beta_inv: f64,
    pub n_steps: usize,
    pub burn_in: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_y: Option<f64>,
}

impl Default for InvariantSection {
    fn default() -> Self {
        InvariantSection {
            x: None,
            gamma: 1.0,
            beta_inv: 1.0,
            n_steps: 4_100_000,
            burn_in: 100_000,
            eta_y: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    /// Local minimum; the objective's best known minimum when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_star: Option<Vec<f64>>,
    pub t: f64,
    /// Per-axis semiconcavity constants; the Hessian diagonal when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    /// Random SPD matrices checked for HM(Λ) ≤ HM(D).
    pub random_matrices: usize,
    pub random_dim: usize,
    /// Random positive vectors checked for min ≤ HM ≤ n·min.
    pub random_vectors: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection {
            x_star: None,
            t: 0.5,
            c: None,
            random_matrices: 100,
            random_dim: 8,
            random_vectors: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub optimizer: OptimizerOverrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sgd: Option<OptimizerOverrides>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy_sgd: Option<OptimizerOverrides>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hj: Option<OptimizerOverrides>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hj2: Option<OptimizerOverrides>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heat: Option<OptimizerOverrides>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elastic: Option<OptimizerOverrides>,
    #[serde(default)]
    pub pde: PdeSection,
    #[serde(default)]
    pub homogenization: HomogenizationSection,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub invariant: InvariantSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default = "figure1_default")]
    pub figure1: Figure1Config,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

fn figure1_default() -> Figure1Config {
    Figure1Config::default()
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment: ExperimentSection::new(kind),
            optimizer: OptimizerOverrides::default(),
            sgd: None,
            entropy_sgd: None,
            hj: None,
            hj2: None,
            heat: None,
            elastic: None,
            pde: PdeSection::default(),
            homogenization: HomogenizationSection::default(),
            control: ControlSection::default(),
            invariant: InvariantSection::default(),
            spectrum: SpectrumSection::default(),
            figure1: Figure1Config::default(),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.experiment
            .out
            .clone()
            .unwrap_or_else(|| Path::new("runs").join(self.experiment.kind.as_str()))
    }

    pub fn objective_name(&self) -> String {
        match (&self.experiment.objective, self.experiment.kind) {
            (Some(name), _) => name.clone(),
            (None, ExperimentKind::ReproduceFigure1) => self.figure1.objective.clone(),
            (None, kind) => kind.default_objective().to_string(),
        }
    }

    fn per_algorithm(&self, algo: Algorithm) -> Option<&OptimizerOverrides> {
        match algo {
            Algorithm::Sgd => self.sgd.as_ref(),
            Algorithm::EntropySgd => self.entropy_sgd.as_ref(),
            Algorithm::Hj => self.hj.as_ref(),
            Algorithm::Hj2 => self.hj2.as_ref(),
            Algorithm::Heat => self.heat.as_ref(),
            Algorithm::Elastic => self.elastic.as_ref(),
        }
    }

    /// Algorithm defaults, then `[optimizer]`, then the algorithm's own section.
    pub fn optimizer_config(&self, algo: Algorithm) -> Result<OptimizerConfig> {
        let mut cfg = OptimizerConfig::for_algorithm(algo);
        self.optimizer.apply(&mut cfg);
        if let Some(o) = self.per_algorithm(algo) {
            o.apply(&mut cfg);
        }
        cfg.validate(algo)
            .map_err(|e| Error::Config(format!("[{algo}] {e}")))?;
        Ok(cfg)
    }

    /// Algorithms this experiment runs.
    pub fn algorithms(&self) -> Vec<Algorithm> {
        match self.experiment.kind {
            ExperimentKind::Optimize => {
                vec![self
                    .experiment
                    .algorithm
                    .or(self.experiment.algorithms.first().copied())
                    .unwrap_or(Algorithm::Sgd)]
            }
            _ => {
                let mut a = self.experiment.algorithms.clone();
                a.sort_by_key(|a| a.as_str());
                a.dedup();
                a
            }
        }
    }

    /// Resolved optimizer configs keyed by algorithm name.
    pub fn resolved_optimizers(&self) -> Result<BTreeMap<String, OptimizerConfig>> {
        self.algorithms()
            .into_iter()
            .map(|a| Ok((a.to_string(), self.optimizer_config(a)?)))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// One `section.key=value` override. The value is read as a TOML literal,
/// falling back to a bare string.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub path: Vec<String>,
    pub value: Value,
}

impl FromStr for Override {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (key, raw) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{s}` is not key=value")))?;
        let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
        if path.iter().any(|p| p.is_empty()) {
            return Err(Error::Config(format!("override key `{key}` is malformed")));
        }
        Ok(Override {
            path,
            value: literal(raw.trim()),
        })
    }
}

fn literal(raw: &str) -> Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(t) => serde_json::to_value(&t["v"]).unwrap_or_else(|_| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

fn set_path(root: &mut Value, path: &[String], value: Value) -> Result<()> {
    let mut node = root;
    for (i, key) in path.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("`{}` is not a section", path[..i].join("."))))?;
        if i + 1 == path.len() {
            obj.insert(key.clone(), value);
            return Ok(());
        }
        node = obj
            .entry(key.clone())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

/// Typed deserialization that names the offending key on failure.
pub fn from_value<T: DeserializeOwned>(value: Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            Error::Config(inner.to_string())
        } else {
            Error::Config(format!("at `{path}`: {inner}"))
        }
    })
}

/// Parses config text; JSON when it starts with `{`, TOML otherwise.
pub fn parse_document(text: &str) -> Result<Value> {
    if text.trim_start().starts_with('{') {
        return Ok(serde_json::from_str(text)?);
    }
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    Ok(serde_json::to_value(table)?)
}

/// Builds a config from an optional file plus overrides; overrides win.
pub fn parse_config(path: Option<&Path>, overrides: &[Override]) -> Result<ExperimentConfig> {
    let mut doc = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
            parse_document(&text)?
        }
        None => Value::Object(Default::default()),
    };
    if !doc.is_object() {
        return Err(Error::Config("config must be a table of sections".into()));
    }
    for o in overrides {
        set_path(&mut doc, &o.path, o.value.clone())?;
    }
    let cfg: ExperimentConfig = from_value(doc)?;
    validate(&cfg)?;
    Ok(cfg)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = from_value(parse_document(text)?)?;
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.experiment.repeat == 0 {
        return Err(Error::Config(
            "`experiment.repeat` must be at least 1".into(),
        ));
    }
    if cfg.experiment.algorithms.is_empty() {
        return Err(Error::Config(
            "`experiment.algorithms` must not be empty".into(),
        ));
    }
    if let Some(steps) = cfg.experiment.steps {
        if steps == 0 || cfg.experiment.kind != ExperimentKind::Optimize {
            return Err(Error::Config(
                "`experiment.steps` must be positive and is only used by `optimize`".into(),
            ));
        }
    }
    if cfg.experiment.threads == Some(0) {
        return Err(Error::Config(
            "`experiment.threads` must be at least 1".into(),
        ));
    }
    for algo in cfg.algorithms() {
        cfg.optimizer_config(algo)?;
    }
    Ok(())
}
