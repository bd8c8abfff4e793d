//! Scenario catalogue and the batch runner that writes result files.

pub mod scenarios;
pub mod suite;

pub use scenarios::{scenario, ScenarioSpec, SCENARIO_NAMES};
pub use suite::{run_suite, SuiteError, SuiteOptions, SuiteSummary};
