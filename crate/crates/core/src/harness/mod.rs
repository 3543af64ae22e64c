//! Experiment harness: traces, reference solutions, rate fits and batch
//! experiments.

pub mod experiment;
pub mod reference;
pub mod slope;
pub mod trace;

pub use experiment::{run_experiment, ExperimentConfig, ExperimentSummary};
pub use reference::{kkt_residual, reference_solve, ReferenceOptions, ReferenceSolution};
pub use slope::{slope_fit, slope_fit_points, SlopeFit};
pub use trace::{run_algorithm, Control, RunOptions, RunOutcome, Trace, TraceRow};
