//! Scenario files: TOML with the sections `map`, `stops`, `vehicle`,
//! `profiles`, `passengers`, `externals`, `odd`, `mission`, `disturbances`,
//! `events` and `permissions`. Times inside records are milliseconds
//! (`tick`, `onset`, `expiry`, `after`); `horizon_s` is in seconds.

use super::permissions::{ActorRole, EventKind, EventLevel, PermissionMatrix, PermissionRule};
use crate::ids::{ExternalId, NodeId, PassengerId, StopId, Tick, OPERATIONAL_PERIOD_MS};
use crate::odd::{OddSpec, PassengerProfile};
use crate::perception::features::{Origin, Subject};
use crate::perception::FeaturePayload;
use crate::plant::disturbance::{Disturbance, DisturbanceKind};
use crate::plant::map::{reference_graph, Edge, Node, RoadGraph, StopPoint};
use crate::plant::passengers::ScriptedMove;
use crate::representation::situation::{Role, Zone};
use crate::strategic::{MissionObjective, Urgency};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;
use thiserror::Error;

pub const DEFAULT_RANGE_M: f64 = 100_000.0;
pub const DEFAULT_RESTING_HR: f64 = 72.0;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("validation failed:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSection {
    /// `"G0"` selects the built-in reference graph.
    #[serde(default)]
    pub reference: Option<String>,
    #[serde(default)]
    pub nodes: Vec<Node>,
    #[serde(default)]
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopSpec {
    pub id: StopId,
    pub node: NodeId,
    pub slot: u32,
    pub slope_deg: f64,
    pub curb_height_cm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSection {
    pub start: NodeId,
    /// Lateral slot the vehicle stands in at the start.
    #[serde(default)]
    pub slot: Option<u32>,
    #[serde(default = "default_range")]
    pub range_m: f64,
    /// Lock release ahead of each door opening, ms.
    #[serde(default)]
    pub unlock_lead_ms: u64,
}

fn default_range() -> f64 {
    DEFAULT_RANGE_M
}

fn default_hr() -> f64 {
    DEFAULT_RESTING_HR
}

fn seated() -> Zone {
    Zone::CabinSeated
}

fn absent() -> Zone {
    Zone::Absent
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PassengerSpec {
    pub id: PassengerId,
    #[serde(default = "seated")]
    pub zone: Zone,
    #[serde(default = "default_hr")]
    pub resting_heart_rate: f64,
    #[serde(default)]
    pub script: Vec<ScriptedMove>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalSpec {
    pub id: ExternalId,
    pub role: Role,
    #[serde(default = "absent")]
    pub zone: Zone,
    #[serde(default)]
    pub script: Vec<ScriptedMove>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssistantSpec {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventPayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_node: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<Vec<PassengerId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub urgency: Option<Urgency>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub features: Vec<FeaturePayload>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserEvent {
    pub tick: Tick,
    /// A passenger or external id, or a remote party
    /// (`GUARDIAN_REMOTE`, `CONTROL_ROOM`, `INFRASTRUCTURE`, `OTHER_VEHICLE`).
    pub actor: String,
    pub level: EventLevel,
    pub kind: EventKind,
    #[serde(default)]
    pub payload: EventPayload,
}

/// The file as written, before defaults and checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub horizon_s: f64,
    pub map: MapSection,
    #[serde(default)]
    pub stops: Vec<StopSpec>,
    pub vehicle: VehicleSection,
    pub profiles: Vec<PassengerProfile>,
    #[serde(default)]
    pub passengers: Vec<PassengerSpec>,
    #[serde(default)]
    pub externals: Vec<ExternalSpec>,
    #[serde(default)]
    pub assistants: Vec<AssistantSpec>,
    #[serde(default)]
    pub odd: OddSpec,
    pub mission: MissionObjective,
    #[serde(default)]
    pub disturbances: Vec<Disturbance>,
    #[serde(default)]
    pub events: Vec<UserEvent>,
    #[serde(default)]
    pub permissions: Vec<PermissionRule>,
}

/// A validated scenario with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub seed: u64,
    pub horizon_s: f64,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub stops: Vec<StopPoint>,
    pub vehicle: VehicleSection,
    pub profiles: Vec<PassengerProfile>,
    pub passengers: Vec<PassengerSpec>,
    pub externals: Vec<ExternalSpec>,
    pub assistants: Vec<AssistantSpec>,
    pub odd: OddSpec,
    pub mission: MissionObjective,
    /// Sorted by onset.
    pub disturbances: Vec<Disturbance>,
    /// Sorted by tick.
    pub events: Vec<UserEvent>,
    pub permissions: PermissionMatrix,
    #[serde(skip)]
    pub map: RoadGraph,
}

impl ScenarioSpec {
    pub fn horizon(&self) -> Tick {
        Tick::from_secs(self.horizon_s)
    }

    /// Permission role of an event actor, if the actor is declared.
    pub fn role_of(&self, actor: &str) -> Option<ActorRole> {
        if let Some(p) = self.profiles.iter().find(|p| p.id.as_str() == actor) {
            return Some(if p.is_adult() {
                ActorRole::Passenger
            } else {
                ActorRole::Child
            });
        }
        if let Some(e) = self.externals.iter().find(|e| e.id.as_str() == actor) {
            return Some(match e.role {
                Role::ExternalHelper => ActorRole::ExternalHelper,
                _ => ActorRole::ExternalOther,
            });
        }
        ActorRole::remote(actor)
    }

    /// Remote origins allowed to send external messages at some level.
    pub fn authorized_origins(&self) -> BTreeSet<Origin> {
        [
            (ActorRole::ControlRoom, Origin::ControlRoom),
            (ActorRole::GuardianRemote, Origin::GuardianRemote),
            (ActorRole::Infrastructure, Origin::Infrastructure),
            (ActorRole::OtherVehicle, Origin::OtherVehicle),
        ]
        .into_iter()
        .filter(|(r, _)| {
            [EventLevel::Strategic, EventLevel::Tactical, EventLevel::Operational]
                .into_iter()
                .any(|l| self.permissions.allows(*r, l, EventKind::ExternalMessage))
        })
        .map(|(_, o)| o)
        .collect()
    }

    pub fn manifest_profiles(&self) -> Vec<&PassengerProfile> {
        self.mission
            .manifest
            .iter()
            .filter_map(|id| self.profiles.iter().find(|p| &p.id == id))
            .collect()
    }
}

pub fn parse_scenario(text: &str, origin: &str) -> Result<ScenarioSpec, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioError::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    validate(file, origin)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioSpec, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text, &path.display().to_string())
}

fn subject_problems(s: &Subject, spec: &ScenarioFile, map: &RoadGraph) -> Option<String> {
    match s {
        Subject::Passenger(p) if !spec.profiles.iter().any(|x| &x.id == p) => Some(format!("unknown passenger `{p}`")),
        Subject::External(e) if !spec.externals.iter().any(|x| &x.id == e) => Some(format!("unknown external `{e}`")),
        Subject::Stop(st) if map.stop(st).is_none() => Some(format!("unknown stop `{st}`")),
        Subject::Edge((a, b)) if map.travel_s(a, b).is_none() => Some(format!("unknown edge `{a}`-`{b}`")),
        _ => None,
    }
}

fn validate(mut file: ScenarioFile, origin: &str) -> Result<ScenarioSpec, ScenarioError> {
    let mut errs = Vec::new();

    let (nodes, edges, mut stops) = match file.map.reference.as_deref() {
        Some("G0") => {
            if !file.map.nodes.is_empty() || !file.map.edges.is_empty() {
                errs.push("map: `reference` and explicit nodes/edges are mutually exclusive".to_string());
            }
            let g = reference_graph();
            (g.nodes().to_vec(), g.edges().to_vec(), g.stops().to_vec())
        }
        Some(other) => {
            errs.push(format!("map.reference: unknown reference graph `{other}`"));
            (Vec::new(), Vec::new(), Vec::new())
        }
        None => (file.map.nodes.clone(), file.map.edges.clone(), Vec::new()),
    };
    if !file.stops.is_empty() {
        stops = file
            .stops
            .iter()
            .map(|s| StopPoint::new(s.id.as_str(), s.node.as_str(), s.slot, s.slope_deg, s.curb_height_cm))
            .collect();
    }
    let map = match RoadGraph::new(nodes.clone(), edges.clone(), stops.clone()) {
        Ok(m) => m,
        Err(e) => return Err(ScenarioError::Validation(vec![format!("map: {e}")])),
    };

    if !(file.horizon_s >= 0.0) {
        errs.push(format!("horizon_s: must be non-negative, got {}", file.horizon_s));
    }
    let horizon = Tick::from_secs(file.horizon_s.max(0.0));

    if !map.contains(&file.vehicle.start) {
        errs.push(format!("vehicle.start: unknown node `{}`", file.vehicle.start));
    }
    if let Some(slot) = file.vehicle.slot {
        if !map.stops_at(&file.vehicle.start).iter().any(|s| s.lateral_slot == slot) {
            errs.push(format!(
                "vehicle.slot: no stop with slot {slot} at `{}`",
                file.vehicle.start
            ));
        }
    }
    if !(file.vehicle.range_m >= 0.0) {
        errs.push("vehicle.range_m: must be non-negative".to_string());
    }

    let mut ids = BTreeSet::new();
    for p in &file.profiles {
        if !ids.insert(p.id.clone()) {
            errs.push(format!("profiles: duplicate id `{}`", p.id));
        }
        errs.extend(p.problems(&map).into_iter().map(|e| format!("profiles.{}: {e}", p.id)));
    }
    errs.extend(file.odd.problems(&map).into_iter().map(|e| format!("odd: {e}")));

    if file.mission.manifest.is_empty() {
        errs.push("mission.manifest: empty".to_string());
    }
    if !map.contains(&file.mission.goal_node) {
        errs.push(format!("mission.goal_node: unknown node `{}`", file.mission.goal_node));
    }
    for id in &file.mission.manifest {
        if !ids.contains(id) {
            errs.push(format!("mission.manifest: `{id}` has no profile"));
        }
    }

    // Manifest passengers without an explicit entry start seated.
    for id in &file.mission.manifest {
        if !file.passengers.iter().any(|p| &p.id == id) {
            file.passengers.push(PassengerSpec {
                id: id.clone(),
                zone: Zone::CabinSeated,
                resting_heart_rate: DEFAULT_RESTING_HR,
                script: Vec::new(),
            });
        }
    }
    let mut seen = BTreeSet::new();
    for p in &file.passengers {
        if !ids.contains(&p.id) {
            errs.push(format!("passengers: `{}` has no profile", p.id));
        }
        if !seen.insert(p.id.clone()) {
            errs.push(format!("passengers: duplicate `{}`", p.id));
        }
    }
    let mut ext = BTreeSet::new();
    for e in &file.externals {
        if !ext.insert(e.id.clone()) || ids.contains(&PassengerId::new(e.id.as_str())) {
            errs.push(format!("externals: duplicate id `{}`", e.id));
        }
        if e.role == Role::Passenger {
            errs.push(format!(
                "externals.{}: role must be EXTERNAL_HELPER or EXTERNAL_OTHER",
                e.id
            ));
        }
    }

    for (i, d) in file.disturbances.iter().enumerate() {
        let at = format!("disturbances[{i}] ({})", d.kind.subtype_name());
        if !d.consistent() {
            errs.push(format!("{at}: category {:?} does not match the subtype", d.category));
        }
        if d.expiry.is_some_and(|e| e <= d.onset) {
            errs.push(format!("{at}: expiry must come after onset"));
        }
        match &d.kind {
            DisturbanceKind::EnvTraffic { stop, from, until } => {
                if map.stop(stop).is_none() {
                    errs.push(format!("{at}: unknown stop `{stop}`"));
                }
                if until <= from {
                    errs.push(format!("{at}: empty occupancy interval"));
                }
            }
            DisturbanceKind::EnvBlockedEdge { a, b } if map.travel_s(a, b).is_none() => {
                errs.push(format!("{at}: unknown edge `{a}`-`{b}`"));
            }
            DisturbanceKind::PaxMedicalEvent { subject, .. }
            | DisturbanceKind::PaxUnscriptedMovement { subject, .. }
                if !ids.contains(subject) =>
            {
                errs.push(format!("{at}: unknown passenger `{subject}`"));
            }
            _ => {}
        }
    }
    file.disturbances.sort_by_key(|d| d.onset);

    let permissions = PermissionMatrix::with_overrides(&file.permissions);
    let probe = ScenarioSpec {
        name: String::new(),
        seed: 0,
        horizon_s: 0.0,
        nodes: Vec::new(),
        edges: Vec::new(),
        stops: Vec::new(),
        vehicle: file.vehicle.clone(),
        profiles: file.profiles.clone(),
        passengers: Vec::new(),
        externals: file.externals.clone(),
        assistants: Vec::new(),
        odd: OddSpec::default(),
        mission: file.mission.clone(),
        disturbances: Vec::new(),
        events: Vec::new(),
        permissions: permissions.clone(),
        map: map.clone(),
    };
    for (i, ev) in file.events.iter().enumerate() {
        let at = format!("events[{i}] ({:?} by `{}`)", ev.kind, ev.actor);
        if probe.role_of(&ev.actor).is_none() {
            errs.push(format!("{at}: undeclared actor"));
        }
        if ev.tick > horizon {
            errs.push(format!("{at}: tick {} beyond the horizon", ev.tick.0));
        }
        if ev.tick.0 % OPERATIONAL_PERIOD_MS != 0 {
            errs.push(format!("{at}: tick must be a multiple of {OPERATIONAL_PERIOD_MS} ms"));
        }
        match ev.kind {
            EventKind::SetMission | EventKind::ChangeDestination => match &ev.payload.goal_node {
                None => errs.push(format!("{at}: payload.goal_node required")),
                Some(g) if !map.contains(g) => errs.push(format!("{at}: unknown node `{g}`")),
                _ => {}
            },
            EventKind::ExternalMessage => {
                if ev.payload.features.is_empty() {
                    errs.push(format!("{at}: payload.features required"));
                }
                if ActorRole::remote(&ev.actor).is_none() {
                    errs.push(format!("{at}: external messages come from remote parties only"));
                }
                for f in &ev.payload.features {
                    if let Some(e) = subject_problems(&f.subject, &file, &map) {
                        errs.push(format!("{at}: {e}"));
                    }
                }
            }
            EventKind::RequestStop | EventKind::EmergencyStop => {}
        }
        if let Some(m) = &ev.payload.manifest {
            for id in m {
                if !ids.contains(id) {
                    errs.push(format!("{at}: manifest `{id}` has no profile"));
                }
            }
        }
    }
    file.events.sort_by_key(|e| e.tick);

    if !errs.is_empty() {
        return Err(ScenarioError::Validation(errs));
    }
    Ok(ScenarioSpec {
        name: file.name.unwrap_or_else(|| {
            Path::new(origin)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        }),
        seed: file.seed,
        horizon_s: file.horizon_s,
        nodes,
        edges,
        stops,
        vehicle: file.vehicle,
        profiles: file.profiles,
        passengers: file.passengers,
        externals: file.externals,
        assistants: file.assistants,
        odd: file.odd,
        mission: file.mission,
        disturbances: file.disturbances,
        events: file.events,
        permissions,
        map,
    })
}
