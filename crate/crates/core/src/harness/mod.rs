//! Scenario loading, the tick loop that wires every level together,
//! scripted user events, logging, replay and log audits.

pub mod audit;
pub mod log;
pub mod permissions;
pub mod run;
pub mod scenario;

pub use log::{AlertMessage, EventLog, Outcome, Record, Verdict};
pub use run::{replay, run, run_path, ReplayReport, RunOptions, ScenarioSource};
pub use scenario::{load_scenario, parse_scenario, ScenarioError, ScenarioSpec};
