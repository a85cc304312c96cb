//! Situation model: the current scene with passengers put in context to the
//! vehicle.

use crate::ids::{ExternalId, NodeId, PassengerId, StopId, Tick};
use crate::odd::PassengerProfile;
use crate::perception::features::{Feature, FeatureKind, FeatureSet, FeatureValue, Interval, Subject};
use crate::plant::map::RoadGraph;
use crate::plant::vehicle::{DoorState, LockState, PlatformState, Position, VehicleState};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Radius of the OUTSIDE_NEAR zone.
pub const OUTSIDE_NEAR_RADIUS_M: f64 = 3.0;

/// Heart-rate band outside which a passenger becomes ELEVATED.
pub const HR_NORMAL_BAND: (f64, f64) = (50.0, 120.0);
/// Heart-rate band outside which a passenger becomes EMERGENCY.
pub const HR_EMERGENCY_BAND: (f64, f64) = (40.0, 150.0);
/// How long a heart rate must stay out of band before it counts.
pub const HR_SUSTAIN_MS: u64 = 10_000;
/// How long a fall must last before it is an emergency.
pub const FALL_SUSTAIN_MS: u64 = 5_000;
/// Time back in band before health steps down again.
pub const RECOVERY_MS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Zone {
    CabinSeated,
    CabinUnsecured,
    OnPlatform,
    Doorway,
    OutsideNear,
    Absent,
}

impl Zone {
    pub fn onboard(self) -> bool {
        matches!(self, Zone::CabinSeated | Zone::CabinUnsecured)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Health {
    Normal,
    Elevated,
    Emergency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Role {
    Passenger,
    ExternalHelper,
    ExternalOther,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorContext {
    /// A passenger or an external person.
    pub actor: Subject,
    pub zone: Zone,
    pub health: Health,
    pub distance_to_vehicle: f64,
    pub role: Role,
    pub fallen: bool,
    pub heart_rate: Option<f64>,
    pub body_temp_c: Option<f64>,
    /// Ambient temperature the person is exposed to.
    pub exposure_c: Option<f64>,
    pub onboard_since: Option<Tick>,
    pub hr_elevated_since: Option<Tick>,
    pub hr_emergency_since: Option<Tick>,
    pub fallen_since: Option<Tick>,
    pub calm_since: Option<Tick>,
}

impl ActorContext {
    pub fn passenger(id: PassengerId, zone: Zone, tick: Tick) -> Self {
        ActorContext {
            actor: Subject::Passenger(id),
            zone,
            health: Health::Normal,
            distance_to_vehicle: crate::plant::passengers::zone_distance(zone),
            role: Role::Passenger,
            fallen: false,
            heart_rate: None,
            body_temp_c: None,
            exposure_c: None,
            onboard_since: zone.onboard().then_some(tick),
            hr_elevated_since: None,
            hr_emergency_since: None,
            fallen_since: None,
            calm_since: None,
        }
    }

    fn external(id: ExternalId, role: Role) -> Self {
        ActorContext {
            actor: Subject::External(id),
            role,
            ..ActorContext::passenger(PassengerId::new(""), Zone::Absent, Tick::ZERO)
        }
    }

    pub fn passenger_id(&self) -> Option<&PassengerId> {
        match &self.actor {
            Subject::Passenger(p) => Some(p),
            _ => None,
        }
    }

    fn set_zone(&mut self, zone: Zone, distance_m: f64, tick: Tick) {
        if zone.onboard() && !self.zone.onboard() {
            self.onboard_since = Some(tick);
        } else if !zone.onboard() {
            self.onboard_since = None;
        }
        self.zone = zone;
        self.distance_to_vehicle = distance_m;
    }

    /// Re-evaluates the health bands at `tick` from the current readings.
    fn evaluate_health(&mut self, tick: Tick) {
        let out = |hr: f64, (lo, hi): (f64, f64)| hr < lo || hr > hi;
        let hr = self.heart_rate;
        let track = |since: Option<Tick>, cond: bool| if cond { since.or(Some(tick)) } else { None };
        self.hr_elevated_since = track(self.hr_elevated_since, hr.is_some_and(|h| out(h, HR_NORMAL_BAND)));
        self.hr_emergency_since = track(self.hr_emergency_since, hr.is_some_and(|h| out(h, HR_EMERGENCY_BAND)));
        self.fallen_since = track(self.fallen_since, self.fallen);

        let held = |since: Option<Tick>, ms: u64| since.is_some_and(|s| tick.since(s) >= ms);
        let target = if held(self.hr_emergency_since, HR_SUSTAIN_MS) || held(self.fallen_since, FALL_SUSTAIN_MS) {
            Health::Emergency
        } else if held(self.hr_elevated_since, HR_SUSTAIN_MS) {
            Health::Elevated
        } else {
            Health::Normal
        };
        if target >= self.health {
            self.health = target;
            self.calm_since = None;
        } else {
            let calm = *self.calm_since.get_or_insert(tick);
            if tick.since(calm) >= RECOVERY_MS {
                self.health = target;
                self.calm_since = None;
            }
        }
    }
}

/// The vehicle as perceived: pose, closures and energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfRepresentation {
    pub position: Position,
    pub speed_mps: f64,
    pub next_node: NodeId,
    pub remaining_m: f64,
    pub slot: Option<u32>,
    pub aligning: bool,
    pub door: DoorState,
    pub door_progress: f64,
    pub lock: LockState,
    pub platform: PlatformState,
    pub platform_obstructed: bool,
    pub range_m: f64,
    pub odometer_m: f64,
}

impl SelfRepresentation {
    pub fn from_vehicle(v: &VehicleState, map: &RoadGraph) -> Self {
        SelfRepresentation {
            position: v.position.clone(),
            speed_mps: v.speed_mps,
            next_node: v.position.next_node().clone(),
            remaining_m: v.remaining_m(map),
            slot: v.slot,
            aligning: v.aligning.is_some(),
            door: v.door,
            door_progress: v.door_progress,
            lock: v.lock,
            platform: v.platform,
            platform_obstructed: false,
            range_m: v.range_m,
            odometer_m: v.odometer_m,
        }
    }

    pub fn at_node(&self) -> Option<&NodeId> {
        self.position.at_node()
    }

    pub fn stationary(&self) -> bool {
        self.speed_mps == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoEntry {
    pub subject: Subject,
    pub key: String,
    pub value: String,
}

/// Static geometry plus the slow-changing environment around the vehicle.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Scenery {
    pub nodes: BTreeSet<NodeId>,
    pub stops: BTreeSet<StopId>,
    /// Declared external persons and the role the scenario gives them.
    pub externals: BTreeMap<ExternalId, Role>,
    /// Known adjacent-lane occupancy per stop.
    pub traffic: BTreeMap<StopId, Vec<Interval>>,
    pub blocked_edges: BTreeSet<(NodeId, NodeId)>,
    pub weather: BTreeSet<String>,
    pub cabin_temp_c: Option<f64>,
    pub ambient_temp_c: Option<f64>,
    pub info: Vec<InfoEntry>,
}

impl Scenery {
    pub fn from_map(map: &RoadGraph, externals: BTreeMap<ExternalId, Role>) -> Self {
        Scenery {
            nodes: map.nodes().iter().map(|n| n.id.clone()).collect(),
            stops: map.stops().iter().map(|s| s.id.clone()).collect(),
            externals,
            ..Scenery::default()
        }
    }

    pub fn edge_blocked(&self, a: &NodeId, b: &NodeId) -> bool {
        self.blocked_edges.contains(&ordered(a, b))
    }
}

pub fn ordered(a: &NodeId, b: &NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicElement {
    pub id: ExternalId,
    pub zone: Zone,
    pub distance_m: f64,
    pub speed_mps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SituationModel {
    pub tick: Tick,
    pub scenery: Scenery,
    pub dynamic_elements: Vec<DynamicElement>,
    pub self_representation: SelfRepresentation,
    /// Declared passengers first, then externals in range; each sorted by id.
    pub actors: Vec<ActorContext>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RepresentationError {
    #[error("feature references undeclared {0:?}")]
    UnknownSubject(Subject),
    #[error("feature set at {got} is older than the model at {model}")]
    StaleFeatures { model: Tick, got: Tick },
}

impl SituationModel {
    pub fn new(
        tick: Tick,
        scenery: Scenery,
        vehicle: SelfRepresentation,
        passengers: impl IntoIterator<Item = (PassengerId, Zone)>,
    ) -> Self {
        let mut actors: Vec<ActorContext> = passengers
            .into_iter()
            .map(|(id, z)| ActorContext::passenger(id, z, tick))
            .collect();
        actors.sort_by(|a, b| a.actor.cmp(&b.actor));
        SituationModel {
            tick,
            scenery,
            dynamic_elements: Vec::new(),
            self_representation: vehicle,
            actors,
        }
    }

    pub fn actor(&self, id: &PassengerId) -> Option<&ActorContext> {
        self.actors.iter().find(|a| a.passenger_id() == Some(id))
    }

    pub fn passengers(&self) -> impl Iterator<Item = &ActorContext> {
        self.actors.iter().filter(|a| a.role == Role::Passenger)
    }

    pub fn onboard(&self) -> impl Iterator<Item = &ActorContext> {
        self.passengers().filter(|a| a.zone.onboard())
    }

    pub fn anyone_in(&self, zone: Zone) -> bool {
        self.actors.iter().any(|a| a.zone == zone)
    }

    fn check_subject(&self, s: &Subject, profiles: &[PassengerProfile]) -> Result<(), RepresentationError> {
        let ok = match s {
            Subject::Passenger(p) => profiles.iter().any(|x| &x.id == p),
            Subject::External(e) => self.scenery.externals.contains_key(e),
            Subject::Stop(id) => self.scenery.stops.contains(id),
            Subject::Edge((a, b)) => self.scenery.nodes.contains(a) && self.scenery.nodes.contains(b),
            Subject::Subsystem(_) | Subject::Vehicle | Subject::Environment => true,
        };
        if ok {
            Ok(())
        } else {
            Err(RepresentationError::UnknownSubject(s.clone()))
        }
    }
}

fn actor_mut<'a>(actors: &'a mut [ActorContext], s: &Subject) -> Option<&'a mut ActorContext> {
    actors.iter_mut().find(|a| &a.actor == s)
}

/// Folds one feature set into the scene. Fields without fresh features are
/// carried forward unchanged.
pub fn update_situation_model(
    prev: &SituationModel,
    fs: &FeatureSet,
    profiles: &[PassengerProfile],
) -> Result<SituationModel, RepresentationError> {
    if fs.tick < prev.tick {
        return Err(RepresentationError::StaleFeatures {
            model: prev.tick,
            got: fs.tick,
        });
    }
    for f in &fs.features {
        prev.check_subject(&f.subject, profiles)?;
    }
    let tick = fs.tick;
    let mut s = prev.clone();
    s.tick = tick;

    for p in profiles {
        let subj = Subject::Passenger(p.id.clone());
        if !s.actors.iter().any(|a| a.actor == subj) {
            s.actors.push(ActorContext::passenger(p.id.clone(), Zone::Absent, tick));
        }
    }

    let mut vitals_touched: BTreeSet<Subject> = BTreeSet::new();
    let mut weather: Option<BTreeSet<String>> = None;
    for f in &fs.features {
        apply_feature(&mut s, f, &mut vitals_touched, &mut weather);
    }
    if let Some(w) = weather {
        s.scenery.weather = w;
    }

    for a in s.actors.iter_mut() {
        if a.fallen && a.zone == Zone::CabinSeated {
            a.zone = Zone::CabinUnsecured;
        }
        if vitals_touched.contains(&a.actor) {
            a.evaluate_health(tick);
        }
    }

    // Externals out of range leave the actor list but stay tracked.
    let (mut pax, ext): (Vec<_>, Vec<_>) = s.actors.into_iter().partition(|a| a.role == Role::Passenger);
    pax.sort_by(|a, b| a.actor.cmp(&b.actor));
    let mut ext: Vec<_> = ext.into_iter().filter(|a| a.zone != Zone::Absent).collect();
    ext.sort_by(|a, b| a.actor.cmp(&b.actor));
    pax.extend(ext);
    s.actors = pax;
    Ok(s)
}

fn apply_feature(
    s: &mut SituationModel,
    f: &Feature,
    vitals: &mut BTreeSet<Subject>,
    weather: &mut Option<BTreeSet<String>>,
) {
    let tick = s.tick;
    match (f.kind, &f.subject, &f.value) {
        (FeatureKind::Posture, Subject::External(id), FeatureValue::Zone { zone, distance_m }) => {
            let role = s.scenery.externals.get(id).copied().unwrap_or(Role::ExternalOther);
            match s.dynamic_elements.iter_mut().find(|d| &d.id == id) {
                Some(d) => {
                    d.zone = *zone;
                    d.distance_m = *distance_m;
                }
                None => {
                    s.dynamic_elements.push(DynamicElement {
                        id: id.clone(),
                        zone: *zone,
                        distance_m: *distance_m,
                        speed_mps: 0.0,
                    });
                    s.dynamic_elements.sort_by(|a, b| a.id.cmp(&b.id));
                }
            }
            if actor_mut(&mut s.actors, &f.subject).is_none() {
                s.actors.push(ActorContext::external(id.clone(), role));
            }
            if let Some(a) = actor_mut(&mut s.actors, &f.subject) {
                a.set_zone(*zone, *distance_m, tick);
            }
        }
        (FeatureKind::Posture, subj, FeatureValue::Zone { zone, distance_m }) => {
            if let Some(a) = actor_mut(&mut s.actors, subj) {
                a.set_zone(*zone, *distance_m, tick);
            }
        }
        (FeatureKind::Fallen, subj, FeatureValue::Flag { value }) => {
            if let Some(a) = actor_mut(&mut s.actors, subj) {
                a.fallen = *value;
                vitals.insert(subj.clone());
            }
        }
        (FeatureKind::HeartRate, subj, FeatureValue::Scalar { value }) => {
            if let Some(a) = actor_mut(&mut s.actors, subj) {
                a.heart_rate = Some(*value);
                vitals.insert(subj.clone());
            }
        }
        (FeatureKind::BodyTemp, subj, FeatureValue::Scalar { value }) => {
            if let Some(a) = actor_mut(&mut s.actors, subj) {
                a.body_temp_c = Some(*value);
            }
        }
        (FeatureKind::BodyTemp, subj, FeatureValue::AmbientContext { celsius }) => {
            if let Some(a) = actor_mut(&mut s.actors, subj) {
                a.exposure_c = Some(*celsius);
            }
        }
        (FeatureKind::CabinTemp, _, FeatureValue::Scalar { value }) => s.scenery.cabin_temp_c = Some(*value),
        (FeatureKind::AmbientTemp, _, FeatureValue::Scalar { value }) => s.scenery.ambient_temp_c = Some(*value),
        (FeatureKind::VehiclePose, _, FeatureValue::Pose(p)) => {
            let me = &mut s.self_representation;
            me.position = p.position.clone();
            me.speed_mps = p.speed_mps;
            me.next_node = p.next_node.clone();
            me.remaining_m = p.remaining_m;
            me.slot = p.slot;
            me.aligning = p.aligning;
        }
        (FeatureKind::DoorPosition, _, FeatureValue::Door { state, progress }) => {
            s.self_representation.door = *state;
            s.self_representation.door_progress = *progress;
        }
        (FeatureKind::LockState, _, FeatureValue::Lock { state }) => s.self_representation.lock = *state,
        (FeatureKind::PlatformPosition, _, FeatureValue::Platform { state, obstructed, .. }) => {
            s.self_representation.platform = *state;
            s.self_representation.platform_obstructed = *obstructed;
        }
        (FeatureKind::SubsystemHealth, _, FeatureValue::Energy { range_m, odometer_m }) => {
            s.self_representation.range_m = *range_m;
            s.self_representation.odometer_m = *odometer_m;
        }
        (FeatureKind::TrafficOccupancy, Subject::Stop(id), FeatureValue::Occupancy { intervals }) => {
            let known = s.scenery.traffic.entry(id.clone()).or_default();
            known.extend(intervals.iter().copied());
            known.retain(|i| i.until > tick);
            known.sort();
            known.dedup();
        }
        (FeatureKind::TrafficOccupancy, Subject::Edge((a, b)), FeatureValue::EdgeBlocked) => {
            s.scenery.blocked_edges.insert(ordered(a, b));
        }
        (FeatureKind::ExternalInfo, Subject::Environment, FeatureValue::Info { key, value }) if key == "weather" => {
            let set = weather.get_or_insert_with(BTreeSet::new);
            set.extend(
                value
                    .split(',')
                    .map(str::trim)
                    .filter(|v| !v.is_empty())
                    .map(String::from),
            );
        }
        (FeatureKind::ExternalInfo, subj, FeatureValue::Info { key, value }) => {
            let entry = InfoEntry {
                subject: subj.clone(),
                key: key.clone(),
                value: value.clone(),
            };
            match s
                .scenery
                .info
                .iter_mut()
                .find(|e| e.subject == entry.subject && e.key == entry.key)
            {
                Some(e) => e.value = entry.value,
                None => s.scenery.info.push(entry),
            }
        }
        // Speech, identity, gesture and breath rate are carried as features
        // only; nothing in the scene depends on them yet.
        _ => {}
    }
}
