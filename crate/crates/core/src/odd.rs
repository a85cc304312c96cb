//! Operational design domain: who may ride alone, where, for how long and
//! under which conditions.

use crate::ids::{NodeId, PassengerId};
use crate::perception::features::Origin;
use crate::plant::map::RoadGraph;
use crate::representation::world::WorldModel;
use crate::strategic::routing::Route;
use crate::strategic::MissionObjective;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Age from which a passenger counts as an accompanying adult.
pub const ADULT_AGE: u32 = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Capability {
    CanClimbStep,
    CanOperateManualRelease,
    CanOperateHmi,
}

fn default_ride_s() -> u64 {
    3_600
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassengerProfile {
    pub id: PassengerId,
    pub age: u32,
    #[serde(default)]
    pub capabilities: BTreeSet<Capability>,
    #[serde(default)]
    pub needs_platform: bool,
    #[serde(default)]
    pub known_nodes: BTreeSet<NodeId>,
    #[serde(default = "default_ride_s")]
    pub max_ride_duration: u64,
    #[serde(default)]
    pub guardian: Option<Origin>,
}

impl PassengerProfile {
    /// An adult who can climb the step and use the HMI.
    pub fn adult(id: &str) -> Self {
        PassengerProfile {
            id: PassengerId::new(id),
            age: 35,
            capabilities: [Capability::CanClimbStep, Capability::CanOperateHmi].into(),
            needs_platform: false,
            known_nodes: BTreeSet::new(),
            max_ride_duration: default_ride_s(),
            guardian: None,
        }
    }

    pub fn has(&self, c: Capability) -> bool {
        self.capabilities.contains(&c)
    }

    pub fn is_adult(&self) -> bool {
        self.age >= ADULT_AGE
    }

    /// Invariant breaches against a map, as readable messages.
    pub fn problems(&self, map: &RoadGraph) -> Vec<String> {
        let mut out = Vec::new();
        if self.needs_platform && self.has(Capability::CanClimbStep) {
            out.push(format!(
                "passenger `{}` needs the platform but can climb the step",
                self.id
            ));
        }
        for n in &self.known_nodes {
            if !map.contains(n) {
                out.push(format!("passenger `{}` knows unknown node `{n}`", self.id));
            }
        }
        if self.max_ride_duration == 0 {
            out.push(format!("passenger `{}` has zero max_ride_duration", self.id));
        }
        out
    }
}

pub fn profile_of<'a>(profiles: &'a [PassengerProfile], id: &PassengerId) -> Option<&'a PassengerProfile> {
    profiles.iter().find(|p| &p.id == id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AllowedNodesMode {
    #[default]
    All,
    KnownToAllPassengers,
    ExplicitList,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssistantRadius {
    pub max_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OddSpec {
    pub min_solo_age: u32,
    #[serde(default)]
    pub required_capabilities_solo: BTreeSet<Capability>,
    #[serde(default)]
    pub allowed_nodes_mode: AllowedNodesMode,
    /// Only read in `EXPLICIT_LIST` mode.
    #[serde(default)]
    pub allowed_nodes: BTreeSet<NodeId>,
    #[serde(default)]
    pub excluded_nodes: BTreeSet<NodeId>,
    pub max_trip_duration: u64,
    pub max_trip_distance: f64,
    pub env_conditions: BTreeSet<String>,
    #[serde(default)]
    pub assistant_radius: Option<AssistantRadius>,
}

impl Default for OddSpec {
    fn default() -> Self {
        OddSpec {
            min_solo_age: 12,
            required_capabilities_solo: BTreeSet::new(),
            allowed_nodes_mode: AllowedNodesMode::All,
            allowed_nodes: BTreeSet::new(),
            excluded_nodes: BTreeSet::new(),
            max_trip_duration: 7_200,
            max_trip_distance: 100_000.0,
            env_conditions: ["CLEAR", "RAIN"].iter().map(|s| s.to_string()).collect(),
            assistant_radius: None,
        }
    }
}

impl OddSpec {
    pub fn problems(&self, map: &RoadGraph) -> Vec<String> {
        let mut out = Vec::new();
        if self.min_solo_age == 0 {
            out.push("odd.min_solo_age must be positive".into());
        }
        if self.max_trip_duration == 0 {
            out.push("odd.max_trip_duration must be positive".into());
        }
        if !(self.max_trip_distance > 0.0) {
            out.push("odd.max_trip_distance must be positive".into());
        }
        if let Some(r) = &self.assistant_radius {
            if !(r.max_distance > 0.0) {
                out.push("odd.assistant_radius.max_distance must be positive".into());
            }
        }
        if self.allowed_nodes_mode == AllowedNodesMode::ExplicitList && self.allowed_nodes.is_empty() {
            out.push("odd.allowed_nodes must be non-empty in EXPLICIT_LIST mode".into());
        }
        for n in self.allowed_nodes.iter().chain(&self.excluded_nodes) {
            if !map.contains(n) {
                out.push(format!("odd references unknown node `{n}`"));
            }
        }
        out
    }

    /// Nodes a route must avoid for this manifest, ignoring duration.
    pub fn route_exclusions(&self, map: &RoadGraph, manifest: &[&PassengerProfile]) -> BTreeSet<NodeId> {
        map.nodes()
            .iter()
            .map(|n| &n.id)
            .filter(|n| !self.node_allowed(map, manifest, n) || self.excluded_nodes.contains(*n))
            .cloned()
            .collect()
    }

    fn node_allowed(&self, map: &RoadGraph, manifest: &[&PassengerProfile], node: &NodeId) -> bool {
        match self.allowed_nodes_mode {
            AllowedNodesMode::All => true,
            AllowedNodesMode::ExplicitList => self.allowed_nodes.contains(node),
            AllowedNodesMode::KnownToAllPassengers => manifest.iter().all(|p| knows(map, p, node)),
        }
    }
}

/// A passenger knows a node if their profile lists it or the map annotates it.
pub fn knows(map: &RoadGraph, p: &PassengerProfile, node: &NodeId) -> bool {
    p.known_nodes.contains(node) || map.node(node).is_some_and(|n| n.known_to.contains(&p.id))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Dimension {
    MinAge,
    Capability,
    UnknownArea,
    ExcludedArea,
    Duration,
    Distance,
    Env,
    Assistant,
}

/// Which dimension reads which field. Each field appears exactly once.
pub const FIELD_DIMENSIONS: [(&str, Dimension); 9] = [
    ("min_solo_age", Dimension::MinAge),
    ("required_capabilities_solo", Dimension::Capability),
    ("allowed_nodes_mode", Dimension::UnknownArea),
    ("allowed_nodes", Dimension::UnknownArea),
    ("excluded_nodes", Dimension::ExcludedArea),
    ("max_trip_duration", Dimension::Duration),
    ("max_trip_distance", Dimension::Distance),
    ("env_conditions", Dimension::Env),
    ("assistant_radius", Dimension::Assistant),
];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Violation {
    pub dimension: Dimension,
    /// Passenger, node, flag or `trip`.
    pub subject: String,
}

impl Violation {
    pub fn new(dimension: Dimension, subject: impl ToString) -> Self {
        Violation {
            dimension,
            subject: subject.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Verdict {
    pub violations: Vec<Violation>,
}

impl Verdict {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn dimensions(&self) -> BTreeSet<Dimension> {
        self.violations.iter().map(|v| v.dimension).collect()
    }

    fn from(mut violations: Vec<Violation>) -> Self {
        violations.sort();
        violations.dedup();
        Verdict { violations }
    }
}

/// What the acceptance check needs beyond the mission itself.
#[derive(Debug, Clone, Copy)]
pub struct MissionContext<'a> {
    pub map: &'a RoadGraph,
    pub env_flags: &'a BTreeSet<String>,
    pub nearest_assistant_m: Option<f64>,
}

fn env_violations<'a>(spec: &'a OddSpec, env: &'a BTreeSet<String>) -> impl Iterator<Item = Violation> + 'a {
    env.iter()
        .filter(|f| !spec.env_conditions.contains(*f))
        .map(|f| Violation::new(Dimension::Env, f))
        .collect::<Vec<_>>()
        .into_iter()
}

fn assistant_violation(spec: &OddSpec, nearest: Option<f64>) -> Option<Violation> {
    let r = spec.assistant_radius.as_ref()?;
    match nearest {
        Some(d) if d <= r.max_distance => None,
        _ => Some(Violation::new(Dimension::Assistant, "trip")),
    }
}

pub fn check_mission(
    spec: &OddSpec,
    obj: &MissionObjective,
    profiles: &[PassengerProfile],
    route: &Route,
    ctx: &MissionContext<'_>,
) -> Verdict {
    let manifest: Vec<&PassengerProfile> = obj.manifest.iter().filter_map(|id| profile_of(profiles, id)).collect();
    let mut v = Vec::new();

    for p in &manifest {
        let accompanied = manifest.iter().any(|o| o.id != p.id && o.is_adult());
        if accompanied {
            continue;
        }
        if p.age < spec.min_solo_age {
            v.push(Violation::new(Dimension::MinAge, &p.id));
        }
        if !spec.required_capabilities_solo.is_subset(&p.capabilities) {
            v.push(Violation::new(Dimension::Capability, &p.id));
        }
    }

    for n in &route.nodes {
        if !spec.node_allowed(ctx.map, &manifest, n) {
            v.push(Violation::new(Dimension::UnknownArea, n));
        }
        if spec.excluded_nodes.contains(n) {
            v.push(Violation::new(Dimension::ExcludedArea, n));
        }
    }

    if route.cost_s > spec.max_trip_duration {
        v.push(Violation::new(Dimension::Duration, "trip"));
    }
    let dist = ctx.map.path_length_m(&route.nodes).unwrap_or(f64::INFINITY);
    if dist > spec.max_trip_distance {
        v.push(Violation::new(Dimension::Distance, "trip"));
    }
    v.extend(env_violations(spec, ctx.env_flags));
    v.extend(assistant_violation(spec, ctx.nearest_assistant_m));
    Verdict::from(v)
}

/// Re-checks the dimensions that can change during a ride.
pub fn check_runtime(spec: &OddSpec, w: &WorldModel, elapsed_s: f64, env_flags: &BTreeSet<String>) -> Verdict {
    let mut v = Vec::new();
    if elapsed_s > spec.max_trip_duration as f64 {
        v.push(Violation::new(Dimension::Duration, "trip"));
    }
    if w.odometer_m > spec.max_trip_distance {
        v.push(Violation::new(Dimension::Distance, "trip"));
    }
    v.extend(env_violations(spec, env_flags));
    v.extend(assistant_violation(spec, w.nearest_assistant_m));
    Verdict::from(v)
}

/// Violations grouped by dimension, for log payloads.
pub fn summarize(v: &Verdict) -> BTreeMap<Dimension, Vec<String>> {
    let mut out: BTreeMap<Dimension, Vec<String>> = BTreeMap::new();
    for x in &v.violations {
        out.entry(x.dimension).or_default().push(x.subject.clone());
    }
    out
}
