//! Deterministic discrete-event simulator wiring the protocol modules into
//! the full epoch lifecycle: gateway batching, worker execution, quality
//! evaluation, score consensus, and settlement, with adversary injection
//! and reproducible reports.

pub mod config;
pub mod engine;
pub mod gateway;
pub mod report;
pub mod scenarios;

pub use config::{ScenarioConfig, SCHEMA_VERSION};
pub use engine::{run_scenario, SimError, Simulation};
pub use report::{
    verify_report_dir, write_run, EpochReport, OutputFormat, ReportError, ScenarioRun, Summary,
    VerifyFailure,
};
