//! Global predicates over a finished log: hierarchy adjacency, record order,
//! safety interlocks, alert soundness, ODD follow-up and event accounting.

use super::log::{FlowKind, Module, Record};
use crate::plant::vehicle::{DoorState, PlatformState};
use crate::strategic::Action;
use serde::Serialize;
use std::collections::BTreeMap;

/// Speed above which an open door counts as driving with it open.
pub const DOOR_SPEED_LIMIT_MPS: f64 = 0.5;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AuditReport {
    pub order: Vec<String>,
    pub hierarchy: Vec<String>,
    pub interlocks: Vec<String>,
    pub replan_actions: Vec<String>,
    pub alerts: Vec<String>,
    pub odd_followup: Vec<String>,
    pub events: Vec<String>,
}

impl AuditReport {
    pub fn clean(&self) -> bool {
        self.findings().next().is_none()
    }

    pub fn findings(&self) -> impl Iterator<Item = &String> {
        self.order
            .iter()
            .chain(&self.hierarchy)
            .chain(&self.interlocks)
            .chain(&self.replan_actions)
            .chain(&self.alerts)
            .chain(&self.odd_followup)
            .chain(&self.events)
    }
}

/// Records must be ordered by (tick, module priority).
pub fn order_violations(records: &[Record]) -> Vec<String> {
    records
        .windows(2)
        .enumerate()
        .filter(|(_, w)| (w[0].tick, w[0].module) > (w[1].tick, w[1].module))
        .map(|(i, w)| {
            format!(
                "record {} ({} {}) after ({} {})",
                i + 1,
                w[1].tick,
                w[1].module,
                w[0].tick,
                w[0].module
            )
        })
        .collect()
}

const COMMAND_EDGES: [(Module, Module); 3] = [
    (Module::Strategic, Module::Tactical),
    (Module::Tactical, Module::Operational),
    (Module::Operational, Module::Plant),
];

/// Commands go one level down, reports one level up, and the emitting
/// module is the sender.
pub fn hierarchy_violations(records: &[Record]) -> Vec<String> {
    records
        .iter()
        .enumerate()
        .filter_map(|(i, r)| {
            let f = r.flow?;
            let edge = match f.kind {
                FlowKind::Command => (f.from, f.to),
                FlowKind::Report => (f.to, f.from),
            };
            let ok = COMMAND_EDGES.contains(&edge) && f.from == r.module;
            (!ok).then(|| format!("record {i} at {} ms: {:?} {} -> {}", r.tick, f.kind, f.from, f.to))
        })
        .collect()
}

/// No driving with the door open; no platform motion unless the door is open.
pub fn interlock_violations(records: &[Record]) -> Vec<String> {
    let mut out = Vec::new();
    for r in records
        .iter()
        .filter(|r| r.module == Module::Plant && r.kind == "state")
    {
        let door: Option<DoorState> = serde_json::from_value(r.payload["door"].clone()).ok();
        let platform: Option<PlatformState> = serde_json::from_value(r.payload["platform"].clone()).ok();
        let speed = r.payload["speed_mps"].as_f64();
        let (Some(door), Some(platform), Some(speed)) = (door, platform, speed) else {
            out.push(format!("{} ms: malformed plant state", r.tick));
            continue;
        };
        if door != DoorState::Closed && speed > DOOR_SPEED_LIMIT_MPS {
            out.push(format!("{} ms: door {door:?} at {speed:.2} m/s", r.tick));
        }
        if platform.in_motion() && door != DoorState::Open {
            out.push(format!("{} ms: platform {platform:?} with door {door:?}", r.tick));
        }
    }
    out
}

fn replans(records: &[Record]) -> impl Iterator<Item = &Record> {
    records
        .iter()
        .filter(|r| r.module == Module::Strategic && r.kind == "replan")
}

/// Every replan picks one of the four courses of action.
pub fn replan_action_violations(records: &[Record]) -> Vec<String> {
    replans(records)
        .filter(|r| serde_json::from_value::<Action>(r.payload["action"].clone()).is_err())
        .map(|r| format!("{} ms: action {}", r.tick, r.payload["action"]))
        .collect()
}

/// A replan requests an alert exactly when some hazard has severity 2 or
/// more, and every alert sent comes from such a replan.
pub fn alert_violations(records: &[Record]) -> Vec<String> {
    let mut out = Vec::new();
    for r in replans(records) {
        let sev = r.payload["max_hazard_severity"].as_u64().unwrap_or(0);
        let alert = !r.payload["alert"].is_null();
        if alert != (sev >= 2) {
            out.push(format!("{} ms: alert {alert} with max severity {sev}", r.tick));
        }
    }
    for a in records
        .iter()
        .filter(|r| r.module == Module::Harness && r.kind == "alert")
    {
        let backed = replans(records).any(|r| {
            r.tick == a.tick
                && r.payload["alert"]["recipient"] == a.payload["recipient"]
                && r.payload["alert"]["hazard"]["kind"] == a.payload["hazard_kind"]
                && r.payload["alert"]["hazard"]["subject"] == a.payload["subject"]
        });
        if !backed {
            out.push(format!("{} ms: alert without a matching replan", a.tick));
        }
    }
    out
}

/// Each runtime ODD violation is followed by a replan within one strategic
/// period, unless the run ended first.
pub fn odd_followup_violations(records: &[Record], period_ms: u64) -> Vec<String> {
    let end = records.last().map_or(0, |r| r.tick);
    records
        .iter()
        .filter(|r| r.module == Module::Odd && r.kind == "runtime_check")
        .filter(|v| {
            let deadline = v.tick + period_ms;
            deadline <= end && !replans(records).any(|r| r.tick > v.tick && r.tick <= deadline)
        })
        .map(|v| format!("{} ms: runtime violation without a replan", v.tick))
        .collect()
}

/// Every scripted event shows up exactly once, routed or rejected.
pub fn event_violations(records: &[Record], n_events: usize) -> Vec<String> {
    let mut seen: BTreeMap<u64, usize> = BTreeMap::new();
    for r in records
        .iter()
        .filter(|r| r.module == Module::Harness && (r.kind == "event_routed" || r.kind == "event_rejected"))
    {
        if let Some(i) = r.payload["event"].as_u64() {
            *seen.entry(i).or_default() += 1;
        }
    }
    (0..n_events as u64)
        .filter_map(|i| match seen.get(&i).copied().unwrap_or(0) {
            1 => None,
            n => Some(format!("event {i} logged {n} times")),
        })
        .chain(
            seen.keys()
                .filter(|&&i| i >= n_events as u64)
                .map(|i| format!("unknown event {i}")),
        )
        .collect()
}

pub fn audit(records: &[Record], n_events: usize) -> AuditReport {
    AuditReport {
        order: order_violations(records),
        hierarchy: hierarchy_violations(records),
        interlocks: interlock_violations(records),
        replan_actions: replan_action_violations(records),
        alerts: alert_violations(records),
        odd_followup: odd_followup_violations(records, crate::ids::STRATEGIC_PERIOD_MS),
        events: event_violations(records, n_events),
    }
}
