//! Configuration, experiment dispatch and on-disk artifacts for the CLI.

pub mod config;
pub mod experiment;
pub mod plot;
pub mod table;

pub use config::{
    parse_config, parse_config_str, ExperimentConfig, ExperimentKind, ExperimentSection,
    OptimizerOverrides, Override,
};
pub use experiment::{run_experiment, ExperimentReport, Manifest};
pub use plot::{emit_plot, render_svg, PlotOptions, Series};
pub use table::{ComparisonRow, ComparisonTable};
