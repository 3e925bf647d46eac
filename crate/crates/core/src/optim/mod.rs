//! Discrete update rules: SGD, Entropy-SGD, HJ (two forms), heat smoothing and
//! Elastic-SGD, with Nesterov momentum and the γ scoping schedule.

mod config;
mod run;
mod steps;

pub use config::{
    eta_at, gamma_schedule, Algorithm, Anneal, Averaging, ElasticCoupling, OptimizerConfig,
};
pub use run::{run, run_with_budget, RunRecord, RunRow};
pub use steps::{
    step_elastic, step_entropy_sgd, step_fn, step_heat, step_hj, step_hj2, step_sgd, wrap_momentum,
    OptimizerState, StepFn, StepOutcome,
};
