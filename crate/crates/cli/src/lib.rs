//! Experiment runner: data generation, training, evaluation, sweeps and the verification
//! suites behind the `pno` binary.

pub mod commands;
pub mod eval;
pub mod report;
pub mod sweep;

pub use commands::{exit_code, EXIT_CONFIG, EXIT_OK, EXIT_VERIFICATION};
pub use eval::{MethodSummary, MetricsRecord};
