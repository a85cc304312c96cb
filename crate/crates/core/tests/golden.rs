//! Frozen fixtures. Regenerate with `ESCORT_UPDATE_GOLDEN=1 cargo test --test golden`
//! and review the diff.

mod common;

use common::{log, spec, CANONICAL};
use escort::harness::log::{Module, Record};
use escort::harness::EventLog;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::path::PathBuf;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn check(name: &str, actual: &Value) {
    let path = fixture(name);
    let text = serde_json::to_string_pretty(actual).unwrap() + "\n";
    if std::env::var_os("ESCORT_UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &text).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let expected: Value = serde_json::from_str(&expected).unwrap();
    assert_eq!(*actual, expected, "{name} differs from the fixture");
}

/// The records worth reading in a diff; everything else is covered by the hash.
fn milestone(r: &Record) -> Option<Value> {
    let p = &r.payload;
    let detail = match (r.module, r.kind.as_str()) {
        (Module::Strategic, "plan") => json!({"action": p["action"], "goal": p["goal_node"], "route": p["route"]}),
        (Module::Strategic, "mission_accepted" | "mission_rejected") => p.clone(),
        (Module::Representation, "hazards") => p.clone(),
        (Module::Perception, "faults") => p.clone(),
        (Module::Tactical, "boarding") => json!({"kind": p["kind"], "phase": p["phase"], "stop": p["stop"]}),
        (Module::Odd, "runtime_check") => p["violations"].clone(),
        (Module::Harness, "alert" | "event_routed" | "event_rejected") => p.clone(),
        _ => return None,
    };
    Some(json!({"tick": r.tick, "module": r.module, "type": r.kind, "detail": detail}))
}

fn summary(l: &EventLog) -> Value {
    json!({
        "seed": l.header.seed,
        "records": l.records.len(),
        "log_sha256": hex::encode(Sha256::digest(l.to_text().as_bytes())),
        "verdict": l.verdict,
        "milestones": l.records.iter().filter_map(milestone).collect::<Vec<_>>(),
    })
}

#[test]
fn canonical_run_summaries() {
    for name in CANONICAL {
        check(&format!("{name}.summary.json"), &summary(&log(name)));
    }
}

#[test]
fn s4_spec_structure() {
    check(
        "s4_medical_emergency.spec.json",
        &serde_json::to_value(spec("s4_medical_emergency")).unwrap(),
    );
}
