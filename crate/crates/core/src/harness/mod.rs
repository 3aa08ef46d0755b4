//! Experiment orchestration: metrics, benchmark runs, timing sweeps and reports.

mod benchmark;
mod method;
mod metrics;
mod timing;

pub use benchmark::{
    run_benchmark, BoundDigest, ExperimentConfig, MethodSummary, Report, RunCell, TaskSpec,
    REPORT_SCHEMA,
};
pub use method::Method;
pub use metrics::{balanced_accuracy, mean_std};
pub use timing::{
    random_timing_design, timing_profile, TimingConfig, TimingPoint, TimingRecord, TimingSlope,
};
