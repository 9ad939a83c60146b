//! Spec-driven experiment runner behind the `vprep` binary.

pub mod output;
pub mod run;
pub mod spec;

pub use run::{run_experiments, InvalidSpec, RunReport};
pub use spec::{diagnostics, paper_defaults, validate_spec, Diagnostic, Experiment, ExperimentSpec};
