//! Simulated world: vehicle, passengers, bystanders, traffic and weather.

pub mod disturbance;
pub mod map;
pub mod passengers;
pub mod vehicle;

use crate::ids::{ExternalId, NodeId, SensorId, StopId, Tick, OPERATIONAL_PERIOD_MS};
use crate::operational::commands::{ActuatorCommand, ActuatorReport, Setpoint, Subsystem};
use crate::perception::features::{FeatureKind, FeatureValue, Interval, PoseValue, Subject};
use crate::perception::{sensors, Reading, SensorFrame};
use crate::representation::situation::{ordered, Zone};
use disturbance::{Disturbance, DisturbanceKind};
use map::RoadGraph;
use passengers::{step_passengers, zone_distance, PassengerTruth, ScriptedMove};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use vehicle::{ActuatorFaults, Commands, StepContext, VehicleState};

/// Lookahead of the side radar's lane prediction.
pub const RADAR_LOOKAHEAD_MS: u64 = 60_000;
pub const DEFAULT_CABIN_C: f64 = 21.0;
pub const DEFAULT_AMBIENT_C: f64 = 15.0;

/// A scripted person outside the vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalTruth {
    pub id: ExternalId,
    pub zone: Zone,
    pub script: Vec<ScriptedMove>,
    pub script_pos: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub tick: Tick,
    pub map: Arc<RoadGraph>,
    pub seed: u64,
    pub vehicle: VehicleState,
    pub passengers: Vec<PassengerTruth>,
    pub externals: Vec<ExternalTruth>,
    /// Scheduled adjacent-lane occupancy per stop.
    pub stop_traffic: BTreeMap<StopId, Vec<Interval>>,
    pub base_weather: BTreeSet<String>,
}

impl PlantState {
    pub fn new(map: Arc<RoadGraph>, seed: u64, vehicle: VehicleState) -> Self {
        PlantState {
            tick: Tick::ZERO,
            map,
            seed,
            vehicle,
            passengers: Vec::new(),
            externals: Vec::new(),
            stop_traffic: BTreeMap::new(),
            base_weather: ["CLEAR".to_string()].into(),
        }
    }

    /// The stop the vehicle is currently aligned to, if halted at one.
    pub fn aligned_stop(&self) -> Option<StopId> {
        let node = self.vehicle.position.at_node()?;
        let slot = self.vehicle.slot?;
        self.map
            .stops_at(node)
            .into_iter()
            .find(|s| s.lateral_slot == slot)
            .map(|s| s.id.clone())
    }
}

/// Everything the active disturbances say about the environment this tick.
#[derive(Debug, Default)]
struct Environment {
    traffic: BTreeMap<StopId, Vec<Interval>>,
    blocked: BTreeSet<(NodeId, NodeId)>,
    weather: BTreeSet<String>,
    ambient_c: f64,
    cabin_c: f64,
    platform_obstructed: bool,
    faults: ActuatorFaults,
}

fn environment(state: &PlantState, active: &[Disturbance]) -> Environment {
    let mut env = Environment {
        traffic: state.stop_traffic.clone(),
        weather: state.base_weather.clone(),
        ambient_c: DEFAULT_AMBIENT_C,
        cabin_c: DEFAULT_CABIN_C,
        ..Environment::default()
    };
    for d in active {
        match &d.kind {
            DisturbanceKind::EnvTraffic { stop, from, until } => {
                env.traffic.entry(stop.clone()).or_default().push(Interval {
                    from: *from,
                    until: *until,
                })
            }
            DisturbanceKind::EnvBlockedEdge { a, b } => {
                env.blocked.insert(ordered(a, b));
            }
            DisturbanceKind::EnvWeather { flag } => {
                env.weather.insert(flag.clone());
            }
            DisturbanceKind::EnvTemperature { ambient_c, cabin_c } => {
                env.ambient_c = *ambient_c;
                if let Some(c) = cabin_c {
                    env.cabin_c = *c;
                }
            }
            DisturbanceKind::EnvPlatformObstruction => env.platform_obstructed = true,
            DisturbanceKind::VehDoorActuatorFault => env.faults.door = true,
            DisturbanceKind::VehPlatformFault => env.faults.platform = true,
            DisturbanceKind::VehRangeLoss { .. }
            | DisturbanceKind::PaxMedicalEvent { .. }
            | DisturbanceKind::PaxUnscriptedMovement { .. } => {}
        }
    }
    for list in env.traffic.values_mut() {
        list.sort();
        list.dedup();
    }
    env
}

fn step_externals(externals: &[ExternalTruth], v: &VehicleState, tick: Tick) -> Vec<ExternalTruth> {
    externals
        .iter()
        .map(|e| {
            let mut e = e.clone();
            if let Some(next) = e.script.get(e.script_pos) {
                let reachable = match (e.zone, next.zone) {
                    (_, Zone::CabinSeated | Zone::CabinUnsecured | Zone::OnPlatform) => false,
                    (Zone::Absent, Zone::Doorway) => false,
                    _ => v.stationary(),
                };
                if tick >= next.after && reachable {
                    e.zone = next.zone;
                    e.script_pos += 1;
                }
            }
            if !v.stationary() {
                e.zone = Zone::Absent;
            }
            e
        })
        .collect()
}

fn reading(sensor: &str, channel: FeatureKind, subject: Subject, value: FeatureValue) -> Reading {
    Reading {
        sensor_id: SensorId::new(sensor),
        channel,
        subject,
        raw_value: value,
    }
}

/// Sensor readings of the post-step ground truth.
fn sense(state: &PlantState, env: &Environment, tick: Tick) -> SensorFrame {
    use FeatureKind as K;
    let v = &state.vehicle;
    let mut r = Vec::new();
    for p in &state.passengers {
        let who = Subject::Passenger(p.id.clone());
        r.push(reading(
            sensors::OCCUPANT_MONITOR,
            K::Posture,
            who.clone(),
            FeatureValue::Zone {
                zone: p.zone,
                distance_m: zone_distance(p.zone),
            },
        ));
        if p.zone == Zone::Absent {
            continue;
        }
        r.push(reading(
            sensors::OCCUPANT_MONITOR,
            K::HeartRate,
            who.clone(),
            FeatureValue::Scalar {
                value: p.observed_heart_rate(state.seed, tick),
            },
        ));
        r.push(reading(
            sensors::OCCUPANT_MONITOR,
            K::BreathRate,
            who.clone(),
            FeatureValue::Scalar { value: p.breath_rate },
        ));
        r.push(reading(
            sensors::OCCUPANT_MONITOR,
            K::BodyTemp,
            who.clone(),
            FeatureValue::Scalar { value: p.body_temp_c },
        ));
        r.push(reading(
            sensors::OCCUPANT_MONITOR,
            K::Fallen,
            who,
            FeatureValue::Flag { value: p.fallen },
        ));
    }
    for e in &state.externals {
        r.push(reading(
            sensors::EXTERIOR_CAMERA,
            K::Posture,
            Subject::External(e.id.clone()),
            FeatureValue::Zone {
                zone: e.zone,
                distance_m: zone_distance(e.zone),
            },
        ));
    }
    r.push(reading(
        sensors::CABIN_THERMOMETER,
        K::CabinTemp,
        Subject::Vehicle,
        FeatureValue::Scalar { value: env.cabin_c },
    ));
    r.push(reading(
        sensors::EXTERIOR_THERMOMETER,
        K::AmbientTemp,
        Subject::Environment,
        FeatureValue::Scalar { value: env.ambient_c },
    ));
    r.push(reading(
        sensors::DOOR_ENCODER,
        K::DoorPosition,
        Subject::Subsystem(Subsystem::Door),
        FeatureValue::Door {
            state: v.door,
            progress: v.door_progress,
        },
    ));
    r.push(reading(
        sensors::LOCK_SWITCH,
        K::LockState,
        Subject::Subsystem(Subsystem::Lock),
        FeatureValue::Lock { state: v.lock },
    ));
    r.push(reading(
        sensors::PLATFORM_ENCODER,
        K::PlatformPosition,
        Subject::Subsystem(Subsystem::Platform),
        FeatureValue::Platform {
            state: v.platform,
            progress: v.platform_progress,
            obstructed: env.platform_obstructed,
        },
    ));
    r.push(reading(
        sensors::ODOMETRY,
        K::VehiclePose,
        Subject::Vehicle,
        FeatureValue::Pose(PoseValue {
            position: v.position.clone(),
            speed_mps: v.speed_mps,
            next_node: v.position.next_node().clone(),
            remaining_m: v.remaining_m(&state.map),
            slot: v.slot,
            aligning: v.aligning.is_some(),
        }),
    ));
    r.push(reading(
        sensors::ENERGY_MONITOR,
        K::SubsystemHealth,
        Subject::Vehicle,
        FeatureValue::Energy {
            range_m: v.range_m,
            odometer_m: v.odometer_m,
        },
    ));
    if let Some(stop) = state.aligned_stop() {
        let horizon = tick.plus_ms(RADAR_LOOKAHEAD_MS);
        let intervals = env
            .traffic
            .get(&stop)
            .map(|l| l.iter().filter(|i| i.overlaps(tick, horizon)).copied().collect())
            .unwrap_or_default();
        r.push(reading(
            sensors::SIDE_RADAR,
            K::TrafficOccupancy,
            Subject::Stop(stop),
            FeatureValue::Occupancy { intervals },
        ));
    }
    let ahead = v.position.next_node();
    for (n, _) in state.map.neighbors(ahead) {
        let e = ordered(ahead, n);
        if env.blocked.contains(&e) {
            r.push(reading(
                sensors::FORWARD_SCANNER,
                K::TrafficOccupancy,
                Subject::Edge(e),
                FeatureValue::EdgeBlocked,
            ));
        }
    }
    r.push(reading(
        sensors::WEATHER_STATION,
        K::ExternalInfo,
        Subject::Environment,
        FeatureValue::Info {
            key: "weather".into(),
            value: env.weather.iter().cloned().collect::<Vec<_>>().join(","),
        },
    ));
    SensorFrame { tick, readings: r }
}

/// One operational period of the simulated world. Faulted or interlocked
/// actuators ignore their commands; the reports carry what was achieved.
pub fn step_plant(
    mut state: PlantState,
    commands: &[ActuatorCommand],
    active: &[Disturbance],
    tick: Tick,
) -> (PlantState, SensorFrame, Vec<ActuatorReport>) {
    let env = environment(&state, active);
    for d in active {
        if let DisturbanceKind::VehRangeLoss { meters } = d.kind {
            if tick.0 < d.onset.0 + OPERATIONAL_PERIOD_MS {
                state.vehicle.range_m = (state.vehicle.range_m - meters).max(0.0);
            }
        }
    }

    let mut cmds = Commands {
        accel: None,
        decel: None,
        steer: None,
        door: None,
        lock: None,
        platform: None,
    };
    for c in commands {
        match &c.setpoint {
            Setpoint::Accel(a) => cmds.accel = Some(*a),
            Setpoint::Decel(d) => cmds.decel = Some(*d),
            Setpoint::Steer { heading, slot } => cmds.steer = Some((heading, *slot)),
            Setpoint::Door(d) => cmds.door = Some(*d),
            Setpoint::Lock(l) => cmds.lock = Some(*l),
            Setpoint::Platform(p) => cmds.platform = Some(*p),
        }
    }
    let someone_on_platform = state.passengers.iter().any(|p| p.zone == Zone::OnPlatform);
    let ctx = StepContext {
        map: &state.map,
        blocked_edges: &env.blocked,
        faults: &env.faults,
        platform_obstructed: env.platform_obstructed,
        someone_on_platform,
    };
    let mut vehicle = state.vehicle.clone();
    let achieved = vehicle.step(&cmds, &ctx);
    state.vehicle = vehicle;

    let reports = commands
        .iter()
        .filter_map(|c| {
            let got = match c.setpoint {
                Setpoint::Accel(_) => achieved.accel.clone(),
                Setpoint::Decel(_) => achieved.decel.clone(),
                Setpoint::Steer { .. } => achieved.steer.clone(),
                Setpoint::Door(_) => achieved.door.clone(),
                Setpoint::Lock(_) => achieved.lock.clone(),
                Setpoint::Platform(_) => achieved.platform.clone(),
            }?;
            Some(ActuatorReport {
                subsystem: c.subsystem,
                commanded: c.setpoint.clone(),
                achieved: got,
                tick,
            })
        })
        .collect();

    state.passengers = step_passengers(&state.passengers, active, &state.vehicle, tick);
    state.externals = step_externals(&state.externals, &state.vehicle, tick);
    state.tick = tick;
    let frame = sense(&state, &env, tick);
    (state, frame, reports)
}

/// Convenience for tests and tools: a passenger truth with a script.
pub fn passenger(id: &str, zone: Zone, needs_platform: bool, stream: u64, script: Vec<ScriptedMove>) -> PassengerTruth {
    let mut p = PassengerTruth::new(id.into(), zone, needs_platform, stream);
    p.script = script;
    p
}
