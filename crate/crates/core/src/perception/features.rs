//! Feature vocabulary shared by perception, representation and the wire format.

use crate::ids::{ExternalId, NodeId, PassengerId, SensorId, StopId, Tick};
use crate::operational::commands::Subsystem;
use crate::plant::vehicle::{DoorState, LockState, PlatformState, Position};
use crate::representation::situation::Zone;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FeatureKind {
    Speech,
    Identity,
    Gesture,
    Posture,
    Fallen,
    BodyTemp,
    HeartRate,
    BreathRate,
    CabinTemp,
    AmbientTemp,
    DoorPosition,
    LockState,
    PlatformPosition,
    VehiclePose,
    TrafficOccupancy,
    SubsystemHealth,
    ExternalInfo,
}

/// What a feature is about.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "id", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Subject {
    Passenger(PassengerId),
    External(ExternalId),
    Subsystem(Subsystem),
    Vehicle,
    Stop(StopId),
    Edge((NodeId, NodeId)),
    Environment,
}

/// Half-open occupancy interval `[from, until)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub from: Tick,
    pub until: Tick,
}

impl Interval {
    pub fn new(from_ms: u64, until_ms: u64) -> Self {
        Interval {
            from: Tick(from_ms),
            until: Tick(until_ms),
        }
    }

    pub fn overlaps(&self, from: Tick, until: Tick) -> bool {
        self.from < until && from < self.until
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseValue {
    pub position: Position,
    pub speed_mps: f64,
    /// Node the vehicle is at or heading to.
    pub next_node: NodeId,
    /// Distance left to `next_node` (0 when at a node).
    pub remaining_m: f64,
    pub slot: Option<u32>,
    pub aligning: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FeatureValue {
    Scalar {
        value: f64,
    },
    Flag {
        value: bool,
    },
    Zone {
        zone: Zone,
        distance_m: f64,
    },
    /// Ambient temperature a passenger is exposed to, derived from a thermometer.
    AmbientContext {
        celsius: f64,
    },
    Door {
        state: DoorState,
        progress: f64,
    },
    Lock {
        state: LockState,
    },
    Platform {
        state: PlatformState,
        progress: f64,
        obstructed: bool,
    },
    Pose(PoseValue),
    Energy {
        range_m: f64,
        odometer_m: f64,
    },
    Occupancy {
        intervals: Vec<Interval>,
    },
    EdgeBlocked,
    Info {
        key: String,
        value: String,
    },
}

/// Where a feature came from: a sensor or an external channel.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "id", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Source {
    Sensor(SensorId),
    External(Origin),
    /// Derived inside perception from another reading.
    Derived(SensorId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Origin {
    ControlRoom,
    GuardianRemote,
    Infrastructure,
    OtherVehicle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub kind: FeatureKind,
    pub subject: Subject,
    pub value: FeatureValue,
    pub source: Source,
    pub tick: Tick,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub tick: Tick,
    pub features: Vec<Feature>,
}

impl FeatureSet {
    pub fn empty(tick: Tick) -> Self {
        FeatureSet {
            tick,
            features: Vec::new(),
        }
    }

    pub fn merge(&mut self, other: FeatureSet) {
        self.tick = self.tick.max(other.tick);
        self.features.extend(other.features);
    }

    pub fn of_kind(&self, kind: FeatureKind) -> impl Iterator<Item = &Feature> {
        self.features.iter().filter(move |f| f.kind == kind)
    }

    pub fn pose(&self) -> Option<&PoseValue> {
        self.of_kind(FeatureKind::VehiclePose).find_map(|f| match &f.value {
            FeatureValue::Pose(p) => Some(p),
            _ => None,
        })
    }

    pub fn door(&self) -> Option<(DoorState, f64)> {
        self.of_kind(FeatureKind::DoorPosition).find_map(|f| match f.value {
            FeatureValue::Door { state, progress } => Some((state, progress)),
            _ => None,
        })
    }

    pub fn lock(&self) -> Option<LockState> {
        self.of_kind(FeatureKind::LockState).find_map(|f| match f.value {
            FeatureValue::Lock { state } => Some(state),
            _ => None,
        })
    }

    pub fn platform_obstructed(&self) -> bool {
        self.of_kind(FeatureKind::PlatformPosition)
            .any(|f| matches!(f.value, FeatureValue::Platform { obstructed: true, .. }))
    }

    /// Someone (passenger or not) is standing in the door opening.
    pub fn doorway_occupied(&self) -> bool {
        self.of_kind(FeatureKind::Posture).any(|f| {
            matches!(
                f.value,
                FeatureValue::Zone {
                    zone: Zone::Doorway,
                    ..
                }
            )
        })
    }
}
