//! The deterministic tick loop and log replay.

use super::log::{
    compare_records, emit_alert, AlertMessage, Audience, Divergence, EventLog, Flow, HazardSummary, InfoLevel,
    InfoOutput, LogError, LogHeader, Module, Outcome, Record, Verdict, LOG_FORMAT,
};
use super::permissions::{route_user_event, ActorRole, Rejection, RoutedInput};
use super::scenario::{load_scenario, parse_scenario, ScenarioError, ScenarioSpec};
use crate::ids::{NodeId, PassengerId, Tick, OPERATIONAL_PERIOD_MS, STRATEGIC_PERIOD_MS, TACTICAL_PERIOD_MS};
use crate::odd::{check_runtime, summarize, PassengerProfile};
use crate::operational::commands::ActuatorCommand;
use crate::operational::{execute, report_actuation};
use crate::perception::features::{FeatureKind, FeatureSet, FeatureValue};
use crate::perception::{ExternalMessage, Perception, SensorSuite, SubsystemFault};
use crate::plant::disturbance::activate_disturbances;
use crate::plant::map::RoadGraph;
use crate::plant::vehicle::VehicleState;
use crate::plant::{self, step_plant, ExternalTruth, PlantState};
use crate::representation::hazards::{assess_hazards, Hazard, HazardKind};
use crate::representation::situation::{Scenery, SelfRepresentation, SituationModel};
use crate::representation::update_situation_model;
use crate::representation::world::{update_world_model, WorldModel};
use crate::strategic::routing::Route;
use crate::strategic::{
    accept_mission, mission_exclusions, replan, Action, MissionObjective, Recipient, Requester, StrategyPlan,
};
use crate::tactical::{Level, Maneuver, PerformanceReport, Tactical, TacticalConfig, TacticalDirective};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    /// Stop after this many seconds even if the horizon is further out.
    pub until_s: Option<f64>,
}

/// Where a scenario came from, for the log header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioSource {
    pub path: String,
    pub sha256: String,
}

impl ScenarioSource {
    pub fn of_text(path: &str, text: &str) -> Self {
        ScenarioSource {
            path: path.to_string(),
            sha256: hex::encode(Sha256::digest(text.as_bytes())),
        }
    }
}

/// Loads and runs a scenario file.
pub fn run_path(path: impl AsRef<Path>, opts: RunOptions) -> Result<EventLog, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let name = path.display().to_string();
    let spec = parse_scenario(&text, &name)?;
    Ok(run(&spec, &ScenarioSource::of_text(&name, &text), opts))
}

fn mission_key(p: &StrategyPlan) -> (Action, &NodeId, &Vec<NodeId>) {
    (p.action, &p.goal_node, &p.route)
}

fn route_of(map: &RoadGraph, nodes: &[NodeId]) -> Option<Route> {
    let cost_s = nodes
        .windows(2)
        .map(|e| map.travel_s(&e[0], &e[1]))
        .sum::<Option<u64>>()?;
    (!nodes.is_empty()).then(|| Route {
        nodes: nodes.to_vec(),
        cost_s,
    })
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("log payloads serialize")
}

/// Subsystem to setpoint, one entry per command.
fn commands_payload(cmds: &[ActuatorCommand]) -> Value {
    Value::Object(
        cmds.iter()
            .map(|c| {
                let sub = to_value(c.subsystem).as_str().unwrap_or_default().to_string();
                (sub, to_value(&c.setpoint))
            })
            .collect(),
    )
}

struct Sim<'a> {
    spec: &'a ScenarioSpec,
    map: Arc<RoadGraph>,
    plant: PlantState,
    perception: Perception,
    sit: SituationModel,
    world: WorldModel,
    hazards: Vec<Hazard>,
    faults: BTreeSet<SubsystemFault>,
    tactical: Tactical,
    plan: Option<StrategyPlan>,
    accepted_at: Tick,
    mission: MissionObjective,
    directive: TacticalDirective,
    commands: Vec<ActuatorCommand>,
    op_perf: PerformanceReport,
    tac_perf: PerformanceReport,
    strategic_seen_perf: PerformanceReport,
    boarding_pending: bool,
    odd_pending: bool,
    next_event: usize,
    pending_missions: Vec<(usize, MissionObjective)>,
    pending_external: Vec<ExternalMessage>,
    alerts_sent: BTreeSet<(Recipient, HazardKind, PassengerId)>,
    alerts: Vec<AlertMessage>,
    hazard_log: BTreeMap<(HazardKind, PassengerId), HazardSummary>,
    last_features: BTreeMap<(FeatureKind, String, String), Value>,
    last_situation: Value,
    last_faults: BTreeSet<SubsystemFault>,
    last_boarding: Value,
    last_maneuver: Option<Maneuver>,
    tick_records: Vec<Record>,
    records: Vec<Record>,
    outcome: Option<Outcome>,
}

impl<'a> Sim<'a> {
    fn new(spec: &'a ScenarioSpec, seed: u64) -> Self {
        let map = Arc::new(spec.map.clone());
        let v = VehicleState::parked_at(spec.vehicle.start.clone(), spec.vehicle.slot, spec.vehicle.range_m);
        let mut plant = PlantState::new(map.clone(), seed, v.clone());
        plant.passengers = spec
            .passengers
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let needs = spec.profiles.iter().any(|x| x.id == p.id && x.needs_platform);
                let mut t = plant::passenger(p.id.as_str(), p.zone, needs, i as u64, p.script.clone());
                t.resting_heart_rate = p.resting_heart_rate;
                t.heart_rate = p.resting_heart_rate;
                t
            })
            .collect();
        plant.externals = spec
            .externals
            .iter()
            .map(|e| ExternalTruth {
                id: e.id.clone(),
                zone: e.zone,
                script: e.script.clone(),
                script_pos: 0,
            })
            .collect();
        let roles = spec.externals.iter().map(|e| (e.id.clone(), e.role)).collect();
        let sit = SituationModel::new(
            Tick::ZERO,
            Scenery::from_map(&map, roles),
            SelfRepresentation::from_vehicle(&v, &map),
            spec.passengers.iter().map(|p| (p.id.clone(), p.zone)),
        );
        let world = WorldModel::new(
            spec.map.clone(),
            spec.profiles.clone(),
            spec.vehicle.start.clone(),
            spec.vehicle.range_m,
            spec.assistants.iter().map(|a| (a.x, a.y)).collect(),
        );
        Sim {
            spec,
            map,
            plant,
            perception: Perception::new(SensorSuite::default(), spec.authorized_origins()),
            sit,
            world,
            hazards: Vec::new(),
            faults: BTreeSet::new(),
            tactical: Tactical::new(TacticalConfig {
                unlock_lead_ms: spec.vehicle.unlock_lead_ms,
            }),
            plan: None,
            accepted_at: Tick::ZERO,
            mission: spec.mission.clone(),
            directive: TacticalDirective::hold(),
            commands: Vec::new(),
            op_perf: PerformanceReport::nominal(Level::Operational),
            tac_perf: PerformanceReport::nominal(Level::Tactical),
            strategic_seen_perf: PerformanceReport::nominal(Level::Tactical),
            boarding_pending: false,
            odd_pending: false,
            next_event: 0,
            pending_missions: Vec::new(),
            pending_external: Vec::new(),
            alerts_sent: BTreeSet::new(),
            alerts: Vec::new(),
            hazard_log: BTreeMap::new(),
            last_features: BTreeMap::new(),
            last_situation: Value::Null,
            last_faults: BTreeSet::new(),
            last_boarding: Value::Null,
            last_maneuver: None,
            tick_records: Vec::new(),
            records: Vec::new(),
            outcome: None,
        }
    }

    fn log(&mut self, r: Record) {
        self.tick_records.push(r);
    }

    fn flush(&mut self) {
        let mut buf = std::mem::take(&mut self.tick_records);
        buf.sort_by_key(|r| r.module);
        self.records.extend(buf);
    }

    fn manifest_profiles(&self) -> Vec<&'a PassengerProfile> {
        let spec = self.spec;
        self.mission
            .manifest
            .iter()
            .filter_map(|id| spec.profiles.iter().find(|p| &p.id == id))
            .collect()
    }

    fn route_events(&mut self, t: Tick) {
        while let Some(ev) = self.spec.events.get(self.next_event).filter(|e| e.tick == t) {
            let idx = self.next_event;
            self.next_event += 1;
            let base = json!({"event": idx, "actor": ev.actor, "level": ev.level, "kind": ev.kind});
            match route_user_event(ev, self.spec) {
                Ok(input) => {
                    let mut p = base;
                    p["input"] = to_value(&input);
                    self.log(Record::new(t, Module::Harness, "event_routed", p));
                    match input {
                        RoutedInput::Mission {
                            goal_node,
                            replace_manifest,
                        } => {
                            let requester = match self.spec.role_of(&ev.actor) {
                                Some(ActorRole::GuardianRemote) => Requester::GuardianRemote,
                                Some(ActorRole::ControlRoom) => Requester::ControlRoom,
                                _ => Requester::Passenger,
                            };
                            let obj = MissionObjective {
                                goal_node,
                                manifest: replace_manifest.unwrap_or_else(|| self.mission.manifest.clone()),
                                urgency: ev.payload.urgency.unwrap_or(self.mission.urgency),
                                requester,
                                deadline: None,
                            };
                            self.pending_missions.push((idx, obj));
                        }
                        RoutedInput::StopRequest => self.tactical.request_stop(),
                        RoutedInput::EmergencyStop => self.tactical.emergency_stop = true,
                        RoutedInput::External(msg) => self.pending_external.push(msg),
                    }
                }
                Err(e) => self.reject(base, e, t),
            }
        }
    }

    fn reject(&mut self, mut base: Value, e: Rejection, t: Tick) {
        base["error"] = to_value(&e);
        base["message"] = Value::String(e.to_string());
        self.log(Record::new(t, Module::Harness, "event_rejected", base));
    }

    fn sense(&mut self, t: Tick) -> FeatureSet {
        let active = activate_disturbances(&self.spec.disturbances, t);
        let (plant, frame, reports) = step_plant(self.plant.clone(), &self.commands, &active, t);
        self.plant = plant;
        let v = &self.plant.vehicle;
        self.log(Record::new(
            t,
            Module::Plant,
            "state",
            json!({
                "position": v.position,
                "speed_mps": v.speed_mps,
                "door": v.door,
                "lock": v.lock,
                "platform": v.platform,
                "slot": v.slot,
                "range_m": v.range_m,
            }),
        ));
        let mismatched: Vec<_> = reports.iter().filter(|r| r.diverges()).collect();
        if !mismatched.is_empty() {
            self.log(
                Record::new(t, Module::Plant, "actuator_mismatch", to_value(&mismatched))
                    .with_flow(Flow::report(Module::Plant, Module::Operational)),
            );
        }

        let mut fs = match self.perception.extract_features(&frame) {
            Ok(fs) => fs,
            Err(e) => {
                self.log(Record::new(t, Module::Perception, "error", json!(e.to_string())));
                FeatureSet::empty(t)
            }
        };
        for msg in std::mem::take(&mut self.pending_external) {
            match self.perception.ingest_external(&msg) {
                Ok(ext) => fs.merge(ext),
                Err(e) => self.log(Record::new(
                    t,
                    Module::Perception,
                    "external_rejected",
                    json!(e.to_string()),
                )),
            }
        }
        self.faults.extend(self.perception.detect_subsystem_faults(&reports));
        if self.faults != self.last_faults {
            self.log(Record::new(t, Module::Perception, "faults", to_value(&self.faults)));
            self.last_faults = self.faults.clone();
        }
        self.log_features(&fs, t);

        self.op_perf = report_actuation(&reports, &self.faults.iter().copied().collect::<Vec<_>>());
        fs
    }

    fn log_features(&mut self, fs: &FeatureSet, t: Tick) {
        let mut changed = Vec::new();
        // Pose and energy are in the plant state record already.
        let logged = fs
            .features
            .iter()
            .filter(|f| !matches!(f.value, FeatureValue::Pose(_) | FeatureValue::Energy { .. }));
        for f in logged {
            let value = to_value(&f.value);
            let key = (
                f.kind,
                serde_json::to_string(&f.subject).expect("subject serializes"),
                value["type"].as_str().unwrap_or_default().to_string(),
            );
            if self.last_features.get(&key) != Some(&value) {
                changed.push(json!({"kind": f.kind, "subject": f.subject, "value": value}));
                self.last_features.insert(key, value);
            }
        }
        if !changed.is_empty() {
            self.log(Record::new(t, Module::Perception, "features", Value::Array(changed)));
        }
    }

    fn represent(&mut self, fs: &FeatureSet, t: Tick) {
        match update_situation_model(&self.sit, fs, &self.spec.profiles) {
            Ok(s) => self.sit = s,
            Err(e) => self.log(Record::new(t, Module::Representation, "error", json!(e.to_string()))),
        }
        self.world = update_world_model(&self.world, &self.sit, t);
        let faults: Vec<SubsystemFault> = self.faults.iter().copied().collect();
        let hazards = assess_hazards(&self.sit, &faults, &self.spec.profiles);

        let situation = json!({
            "actors": self.sit.actors.iter().map(|a| json!({"actor": a.actor, "zone": a.zone, "health": a.health})).collect::<Vec<_>>(),
            "blocked_edges": self.sit.scenery.blocked_edges,
            "weather": self.sit.scenery.weather,
        });
        if situation != self.last_situation {
            self.log(Record::new(t, Module::Representation, "situation", situation.clone()));
            self.last_situation = situation;
        }
        if hazards != self.hazards {
            self.log(Record::new(t, Module::Representation, "hazards", to_value(&hazards)));
            for h in &hazards {
                let e = self
                    .hazard_log
                    .entry((h.kind, h.subject.clone()))
                    .or_insert_with(|| HazardSummary {
                        kind: h.kind,
                        subject: h.subject.clone(),
                        max_severity: h.severity,
                        first_tick: t.0,
                    });
                e.max_severity = e.max_severity.max(h.severity);
            }
            self.hazards = hazards;
        }
    }

    fn adopt(&mut self, plan: StrategyPlan, t: Tick) {
        self.world.active_route = route_of(&self.map, &plan.route);
        let changed = self.plan.as_ref().is_none_or(|p| mission_key(p) != mission_key(&plan));
        if changed {
            self.log(
                Record::new(t, Module::Strategic, "plan", to_value(&plan))
                    .with_flow(Flow::command(Module::Strategic, Module::Tactical)),
            );
            let info = |audience| InfoOutput {
                tick: t.0,
                level: InfoLevel::Strategic,
                audience,
                code: "PLAN".into(),
                payload: json!({"action": plan.action, "goal": plan.goal_node, "eta_s": self.world.travel_time(&plan.goal_node)}),
            };
            let mut outs = vec![info(Audience::Onboard)];
            if plan.action != Action::Continue {
                outs.push(info(Audience::Remote));
            }
            for o in outs {
                self.log(Record::new(t, Module::Strategic, "info", to_value(&o)));
            }
        }
        self.plan = Some(plan);
    }

    fn accept(&self, obj: &MissionObjective) -> Result<StrategyPlan, Value> {
        accept_mission(
            obj,
            &self.spec.profiles,
            &self.spec.odd,
            &self.world,
            &self.sit.scenery.weather,
        )
        .map_err(|e| {
            let detail = match &e {
                crate::strategic::AcceptError::Rejected(v) => to_value(summarize(v)),
                _ => Value::Null,
            };
            json!({"goal": obj.goal_node, "error": e.to_string(), "violations": detail})
        })
    }

    fn strategic(&mut self, t: Tick) {
        if t == Tick::ZERO {
            let obj = self.mission.clone();
            match self.accept(&obj) {
                Ok(plan) => {
                    self.log(Record::new(
                        t,
                        Module::Strategic,
                        "mission_accepted",
                        json!({"goal": obj.goal_node, "route": plan.route}),
                    ));
                    self.start_mission(&obj, t);
                    self.adopt(plan, t);
                }
                Err(why) => {
                    self.log(Record::new(t, Module::Strategic, "mission_rejected", why));
                    self.outcome = Some(Outcome::Rejected);
                    return;
                }
            }
        }
        for (idx, obj) in std::mem::take(&mut self.pending_missions) {
            match self.accept(&obj) {
                Ok(plan) => {
                    self.log(Record::new(
                        t,
                        Module::Strategic,
                        "mission_accepted",
                        json!({"event": idx, "goal": obj.goal_node, "route": plan.route}),
                    ));
                    self.mission = obj.clone();
                    self.start_mission(&obj, t);
                    self.adopt(plan, t);
                }
                Err(mut why) => {
                    why["event"] = json!(idx);
                    self.log(Record::new(t, Module::Strategic, "mission_rejected", why));
                }
            }
        }
        let Some(current) = self.plan.clone() else { return };

        let mut triggers = Vec::new();
        if t.0.is_multiple_of(STRATEGIC_PERIOD_MS) {
            triggers.push("PERIODIC");
        }
        if self
            .tick_records
            .iter()
            .any(|r| r.module == Module::Representation && r.kind == "hazards")
        {
            triggers.push("HAZARD_CHANGE");
        }
        if self.tac_perf != self.strategic_seen_perf {
            triggers.push("PERFORMANCE_CHANGE");
            self.strategic_seen_perf = self.tac_perf.clone();
        }
        if std::mem::take(&mut self.odd_pending) {
            triggers.push("ODD_VIOLATION");
        }
        if triggers.is_empty() {
            return;
        }
        let next = replan(&current, &self.world, &self.hazards, &self.tac_perf);
        self.log(Record::new(
            t,
            Module::Strategic,
            "replan",
            json!({
                "trigger": triggers,
                "max_hazard_severity": self.hazards.iter().map(|h| h.severity).max(),
                "performance": self.tac_perf,
                "action": next.action,
                "goal": next.goal_node,
                "route": next.route,
                "alert": next.alert,
                "rationale": next.rationale,
            }),
        ));
        if let Some(req) = &next.alert {
            let key = (req.recipient, req.hazard.kind, req.hazard.subject.clone());
            if self.alerts_sent.insert(key) {
                let msg = emit_alert(req, t);
                self.log(Record::new(t, Module::Harness, "alert", to_value(&msg)));
                self.alerts.push(msg);
            }
        }
        self.adopt(next, t);
    }

    fn start_mission(&mut self, obj: &MissionObjective, t: Tick) {
        self.world.mission_goal = obj.goal_node.clone();
        self.world.excluded_nodes = mission_exclusions(obj, &self.spec.profiles, &self.spec.odd, &self.world);
        if t == Tick::ZERO {
            self.world.departure_node = self.spec.vehicle.start.clone();
            self.accepted_at = t;
            self.boarding_pending = true;
        }
    }

    fn odd_check(&mut self, t: Tick) {
        if self.plan.is_none() || !t.0.is_multiple_of(STRATEGIC_PERIOD_MS) || t == Tick::ZERO {
            return;
        }
        let elapsed = t.since(self.accepted_at) as f64 / 1000.0;
        let v = check_runtime(&self.spec.odd, &self.world, elapsed, &self.sit.scenery.weather);
        if !v.ok() {
            self.log(Record::new(
                t,
                Module::Odd,
                "runtime_check",
                json!({"violations": summarize(&v)}),
            ));
            self.odd_pending = true;
        }
    }

    fn tactical(&mut self, t: Tick) {
        if !t.0.is_multiple_of(TACTICAL_PERIOD_MS) {
            return;
        }
        let Some(plan) = self.plan.clone() else { return };
        let manifest = self.manifest_profiles();
        if self.boarding_pending
            && self.sit.self_representation.stationary()
            && self.sit.self_representation.at_node().is_some()
        {
            self.boarding_pending = false;
            self.tactical.start_boarding(&self.map, &self.sit, &manifest);
        }
        self.directive = self.tactical.step(&plan, &self.sit, &self.map, &manifest);
        self.tac_perf = self.tactical.report(&self.op_perf);

        self.log(
            Record::new(t, Module::Operational, "performance", to_value(&self.op_perf))
                .with_flow(Flow::report(Module::Operational, Module::Tactical)),
        );
        self.log(
            Record::new(t, Module::Tactical, "directive", to_value(&self.directive))
                .with_flow(Flow::command(Module::Tactical, Module::Operational)),
        );
        self.log(
            Record::new(t, Module::Tactical, "performance", to_value(&self.tac_perf))
                .with_flow(Flow::report(Module::Tactical, Module::Strategic)),
        );
        let boarding = match self.tactical.task.as_ref().or(self.tactical.completed.as_ref()) {
            Some(b) => json!({"kind": b.kind, "phase": b.phase, "stop": b.stop.id, "trace": b.trace}),
            None => Value::Null,
        };
        if boarding != self.last_boarding {
            self.log(Record::new(t, Module::Tactical, "boarding", boarding.clone()));
            self.last_boarding = boarding;
        }
        if self.last_maneuver != Some(self.directive.maneuver) {
            self.last_maneuver = Some(self.directive.maneuver);
            let o = InfoOutput {
                tick: t.0,
                level: InfoLevel::Tactical,
                audience: Audience::OtherRoadUsers,
                code: "MANEUVER".into(),
                payload: json!({"maneuver": self.directive.maneuver}),
            };
            self.log(Record::new(t, Module::Tactical, "info", to_value(&o)));
        }
    }

    fn operate(&mut self, fs: &FeatureSet, t: Tick) {
        self.commands = execute(&self.directive, fs, t);
        self.log(
            Record::new(t, Module::Operational, "commands", commands_payload(&self.commands))
                .with_flow(Flow::command(Module::Operational, Module::Plant)),
        );
    }

    fn terminal(&mut self) {
        if self.outcome.is_some() {
            return;
        }
        let Some(plan) = &self.plan else { return };
        if self.tactical.handed_over(&self.sit) {
            self.outcome = Some(if plan.goal_node == self.world.mission_goal {
                Outcome::Completed
            } else if plan.goal_node == self.world.departure_node {
                Outcome::Returned
            } else {
                Outcome::Diverted
            });
        } else if plan.action == Action::StopImmediately && self.sit.self_representation.stationary() {
            self.outcome = Some(Outcome::Stopped);
        }
    }

    fn step(&mut self, t: Tick) {
        self.route_events(t);
        let fs = self.sense(t);
        self.represent(&fs, t);
        self.strategic(t);
        if self.outcome == Some(Outcome::Rejected) {
            return;
        }
        self.odd_check(t);
        self.tactical(t);
        self.operate(&fs, t);
        self.terminal();
    }

    fn finish(mut self, end: Tick) -> (Vec<Record>, Verdict) {
        for idx in self.next_event..self.spec.events.len() {
            let ev = &self.spec.events[idx];
            let base = json!({"event": idx, "actor": ev.actor, "level": ev.level, "kind": ev.kind});
            self.reject(base, Rejection::NotReached { ended: end.0 }, end);
        }
        let verdict = Verdict {
            outcome: self.outcome.unwrap_or(Outcome::Incomplete),
            goal_node: self.plan.as_ref().map(|p| p.goal_node.clone()),
            end_tick: end.0,
            hazards: self.hazard_log.values().cloned().collect(),
            alerts: self.alerts.clone(),
        };
        self.log(Record::new(end, Module::Harness, "verdict", to_value(&verdict)));
        self.flush();
        (self.records, verdict)
    }
}

/// Runs a validated scenario to a terminal outcome or the horizon.
pub fn run(spec: &ScenarioSpec, source: &ScenarioSource, opts: RunOptions) -> EventLog {
    let seed = opts.seed.unwrap_or(spec.seed);
    let horizon_s = opts.until_s.map_or(spec.horizon_s, |u| u.min(spec.horizon_s)).max(0.0);
    let horizon = Tick::from_secs(horizon_s);
    let mut sim = Sim::new(spec, seed);
    let mut end = Tick::ZERO;
    if horizon > Tick::ZERO {
        let mut t = Tick::ZERO;
        while t <= horizon {
            sim.step(t);
            sim.flush();
            end = t;
            if sim.outcome.is_some() {
                break;
            }
            t = t.plus_ms(OPERATIONAL_PERIOD_MS);
        }
    }
    let (records, verdict) = sim.finish(end);
    EventLog {
        header: LogHeader {
            format: LOG_FORMAT,
            scenario: source.path.clone(),
            sha256: source.sha256.clone(),
            seed,
            until_s: horizon_s,
        },
        records,
        verdict,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayReport {
    pub scenario: String,
    pub records: usize,
    pub divergence: Option<Divergence>,
}

impl ReplayReport {
    pub fn identical(&self) -> bool {
        self.divergence.is_none()
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("scenario {path} changed since the log was written (sha256 {actual}, log has {expected})")]
    ScenarioChanged {
        path: String,
        expected: String,
        actual: String,
    },
}

/// The header path as written, else relative to the log's directory, else
/// the bare file name next to the log.
fn resolve_scenario(header: &LogHeader, log_path: &Path) -> PathBuf {
    let p = PathBuf::from(&header.scenario);
    if p.exists() {
        return p;
    }
    let dir = log_path.parent().unwrap_or(Path::new(""));
    [Some(dir.join(&p)), p.file_name().map(|f| dir.join(f))]
        .into_iter()
        .flatten()
        .find(|c| c.exists())
        .unwrap_or(p)
}

/// Re-runs the scenario named in the log header and compares the records.
pub fn replay(log_path: impl AsRef<Path>) -> Result<ReplayReport, ReplayError> {
    let log_path = log_path.as_ref();
    let log = EventLog::load(log_path)?;
    replay_log(&log, log_path)
}

pub fn replay_log(log: &EventLog, log_path: &Path) -> Result<ReplayReport, ReplayError> {
    let path = resolve_scenario(&log.header, log_path);
    let text = std::fs::read_to_string(&path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let source = ScenarioSource::of_text(&log.header.scenario, &text);
    if source.sha256 != log.header.sha256 {
        return Err(ReplayError::ScenarioChanged {
            path: path.display().to_string(),
            expected: log.header.sha256.clone(),
            actual: source.sha256,
        });
    }
    let spec = parse_scenario(&text, &path.display().to_string())?;
    let again = run(
        &spec,
        &source,
        RunOptions {
            seed: Some(log.header.seed),
            until_s: Some(log.header.until_s),
        },
    );
    Ok(ReplayReport {
        scenario: log.header.scenario.clone(),
        records: log.records.len(),
        divergence: compare_records(&log.records, &again.records, |_| false),
    })
}

/// Loads a scenario only to check it.
pub fn validate(path: impl AsRef<Path>) -> Result<ScenarioSpec, ScenarioError> {
    load_scenario(path)
}
