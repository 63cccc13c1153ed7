//! Library side of the `rulecover` command: configuration, pipeline and reports.

pub mod config;
pub mod pipeline;
pub mod report;

pub use config::{Algorithm, RunConfig};
pub use pipeline::{prepare, run_once, run_repeats, Prepared, RunOutcome};
pub use report::RunReport;
