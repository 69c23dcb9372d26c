//! Experiment runner for crn-share: frame-level and long-term sweeps,
//! sensing-error injection, oracle validation and CSV/JSON output.

pub mod ergodic;
pub mod error;
pub mod frame;
pub mod row;
pub mod simulate;
pub mod spec;
pub mod stats;
pub mod validate;

pub use error::{HarnessError, Result};
pub use row::{Format, ResultRow};
pub use spec::{ExperimentKind, ExperimentSpec};

/// Runs the experiment described by `spec`.
pub fn run(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    match spec.kind {
        ExperimentKind::FrameSweep => frame::run_frame_sweep(spec),
        ExperimentKind::ErgodicSweep => ergodic::run_ergodic_sweep(spec),
        ExperimentKind::VarsigmaSweep => ergodic::run_varsigma_sweep(spec),
        ExperimentKind::SensingErrorSweep => ergodic::run_sensing_error_sweep(spec),
        ExperimentKind::Validate => Err(HarnessError::BadInput("validation produces a report, not rows".into())),
    }
}
