//! Numerical checks of the smoothing theory: homogenization, the inner
//! invariant measure, the control interpretation, semiconcavity decay and
//! harmonic-mean spectral bounds.

pub mod control;
pub mod figure1;
pub mod homogenization;
pub mod invariant;
pub mod semiconcavity;
pub mod spectrum;

pub use control::{control_improvement_experiment, ControlComparison, ControlConfig};
pub use figure1::{reproduce_figure1, window_mass, Figure1Config, Figure1Result};
pub use homogenization::{
    reference_gradient, verify_homogenization, HomogenizationConfig, HomogenizationRow,
    HomogenizationTable, Reference,
};
pub use invariant::{
    quadratic_invariant_closed_form, sample_invariant_measure, sample_invariant_measure_with,
    Gaussian, InvariantMeasureEstimate, QuadraticInvariant, SamplerConfig,
};
pub use semiconcavity::{
    decay_bound, semiconcavity_report, SemiconcavityConstants, SemiconcavityRow,
};
pub use spectrum::{
    arithmetic_mean, harmonic_mean, matrix_spectrum, spectrum_summary, SpectrumSummary,
};
