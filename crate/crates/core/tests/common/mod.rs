#![allow(dead_code)]

use escort::harness::log::{Module, Record};
use escort::harness::{load_scenario, run_path, EventLog, RunOptions, ScenarioSpec};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Mutex, OnceLock};

pub const CANONICAL: [&str; 13] = [
    "s1_nominal",
    "s2_platform_boarding",
    "s2r_doorway_reflex",
    "s3_door_traffic",
    "s3b_door_saturated",
    "s4_medical_emergency",
    "s5_door_fault",
    "s5b_door_fault_capable",
    "s6_weather_storm",
    "s7_emergency_stop",
    "s8_child_guardian",
    "s9_platform_obstruction",
    "s10_blocked_edge",
];

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn scenario_path(name: &str) -> PathBuf {
    workspace_root().join("scenarios").join(format!("{name}.toml"))
}

pub fn spec(name: &str) -> ScenarioSpec {
    load_scenario(scenario_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn run_fresh(name: &str, opts: RunOptions) -> EventLog {
    run_path(scenario_path(name), opts).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Each canonical scenario runs once per test binary.
pub fn log(name: &str) -> EventLog {
    static CACHE: OnceLock<Mutex<BTreeMap<String, EventLog>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(l) = cache.lock().unwrap().get(name) {
        return l.clone();
    }
    let l = run_fresh(name, RunOptions::default());
    cache.lock().unwrap().insert(name.to_string(), l.clone());
    l
}

pub fn of<'a>(records: &'a [Record], module: Module, kind: &'a str) -> impl Iterator<Item = &'a Record> + 'a {
    records.iter().filter(move |r| r.module == module && r.kind == kind)
}

pub fn plant_states(records: &[Record]) -> impl Iterator<Item = &Record> {
    of(records, Module::Plant, "state")
}

/// Tick of the first plant state whose door has left CLOSED.
pub fn first_door_open(records: &[Record]) -> Option<u64> {
    plant_states(records)
        .find(|r| r.payload["door"] != "CLOSED")
        .map(|r| r.tick)
}
