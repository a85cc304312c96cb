//! Perception: sensor frames and external messages in, feature sets out.

pub mod faults;
pub mod features;

use crate::ids::{SensorId, Tick};
use crate::representation::situation::Zone;
use features::{Feature, FeatureKind, FeatureSet, FeatureValue, Origin, Source, Subject};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

pub use faults::{FaultDetector, FaultMode, SubsystemFault};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub sensor_id: SensorId,
    pub channel: FeatureKind,
    pub subject: Subject,
    pub raw_value: FeatureValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub tick: Tick,
    pub readings: Vec<Reading>,
}

/// One entry of an external message; tick and source are stamped on ingest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePayload {
    pub kind: FeatureKind,
    pub subject: Subject,
    pub value: FeatureValue,
}

/// Information pushed to the vehicle from outside. Also the line format of
/// the control-room stub.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalMessage {
    pub tick: Tick,
    pub origin: Origin,
    pub payload: Vec<FeaturePayload>,
}

impl ExternalMessage {
    pub fn to_wire(&self) -> String {
        serde_json::to_string(self).expect("external message serializes")
    }

    pub fn from_wire(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line.trim())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerceptionError {
    #[error("unknown sensor `{0}`")]
    UnknownSensor(SensorId),
    #[error("sensor `{sensor}` does not provide channel {channel:?}")]
    ChannelMismatch { sensor: SensorId, channel: FeatureKind },
    #[error("origin {0:?} is not authorized to send features")]
    UnauthorizedOrigin(Origin),
    #[error("frame tick {got} does not advance past {last}")]
    NonMonotonicFrame { last: Tick, got: Tick },
}

pub mod sensors {
    pub const OCCUPANT_MONITOR: &str = "occupant_monitor";
    pub const EXTERIOR_CAMERA: &str = "exterior_camera";
    pub const CABIN_THERMOMETER: &str = "cabin_thermometer";
    pub const EXTERIOR_THERMOMETER: &str = "exterior_thermometer";
    pub const DOOR_ENCODER: &str = "door_encoder";
    pub const LOCK_SWITCH: &str = "lock_switch";
    pub const PLATFORM_ENCODER: &str = "platform_encoder";
    pub const ODOMETRY: &str = "odometry";
    pub const ENERGY_MONITOR: &str = "energy_monitor";
    pub const SIDE_RADAR: &str = "side_radar";
    pub const FORWARD_SCANNER: &str = "forward_scanner";
    pub const WEATHER_STATION: &str = "weather_station";
}

/// Declared sensors and the channels each one may report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorSuite(pub BTreeMap<SensorId, BTreeSet<FeatureKind>>);

impl Default for SensorSuite {
    fn default() -> Self {
        use sensors::*;
        use FeatureKind::*;
        let table: [(&str, &[FeatureKind]); 12] = [
            (
                OCCUPANT_MONITOR,
                &[
                    Posture, Fallen, HeartRate, BreathRate, BodyTemp, Speech, Identity, Gesture,
                ],
            ),
            (EXTERIOR_CAMERA, &[Posture, Gesture]),
            (CABIN_THERMOMETER, &[CabinTemp]),
            (EXTERIOR_THERMOMETER, &[AmbientTemp]),
            (DOOR_ENCODER, &[DoorPosition]),
            (LOCK_SWITCH, &[LockState]),
            (PLATFORM_ENCODER, &[PlatformPosition]),
            (ODOMETRY, &[VehiclePose]),
            (ENERGY_MONITOR, &[SubsystemHealth]),
            (SIDE_RADAR, &[TrafficOccupancy]),
            (FORWARD_SCANNER, &[TrafficOccupancy]),
            (WEATHER_STATION, &[ExternalInfo]),
        ];
        SensorSuite(
            table
                .iter()
                .map(|(id, ch)| (SensorId::new(*id), ch.iter().copied().collect()))
                .collect(),
        )
    }
}

/// One feature per reading, plus ambient-temperature context for every
/// passenger sharing the thermometer's zone.
pub fn extract_features(frame: &SensorFrame, suite: &SensorSuite) -> Result<FeatureSet, PerceptionError> {
    let mut features = Vec::with_capacity(frame.readings.len());
    let zones: Vec<(&Subject, Zone)> = frame
        .readings
        .iter()
        .filter_map(|r| match (&r.subject, &r.raw_value) {
            (s @ Subject::Passenger(_), FeatureValue::Zone { zone, .. }) => Some((s, *zone)),
            _ => None,
        })
        .collect();
    for r in &frame.readings {
        let channels = suite
            .0
            .get(&r.sensor_id)
            .ok_or_else(|| PerceptionError::UnknownSensor(r.sensor_id.clone()))?;
        if !channels.contains(&r.channel) {
            return Err(PerceptionError::ChannelMismatch {
                sensor: r.sensor_id.clone(),
                channel: r.channel,
            });
        }
        features.push(Feature {
            kind: r.channel,
            subject: r.subject.clone(),
            value: r.raw_value.clone(),
            source: Source::Sensor(r.sensor_id.clone()),
            tick: frame.tick,
        });
        let exposed: fn(Zone) -> bool = match r.channel {
            FeatureKind::CabinTemp => |z| z.onboard(),
            FeatureKind::AmbientTemp => |z| !z.onboard() && z != Zone::Absent,
            _ => continue,
        };
        let FeatureValue::Scalar { value: celsius } = r.raw_value else {
            continue;
        };
        for (subject, _) in zones.iter().filter(|(_, z)| exposed(*z)) {
            features.push(Feature {
                kind: FeatureKind::BodyTemp,
                subject: (*subject).clone(),
                value: FeatureValue::AmbientContext { celsius },
                source: Source::Derived(r.sensor_id.clone()),
                tick: frame.tick,
            });
        }
    }
    Ok(FeatureSet {
        tick: frame.tick,
        features,
    })
}

/// Stamps an authorized message's payload with its origin.
pub fn ingest_external(msg: &ExternalMessage, authorized: &BTreeSet<Origin>) -> Result<FeatureSet, PerceptionError> {
    if !authorized.contains(&msg.origin) {
        return Err(PerceptionError::UnauthorizedOrigin(msg.origin));
    }
    Ok(FeatureSet {
        tick: msg.tick,
        features: msg
            .payload
            .iter()
            .map(|p| Feature {
                kind: p.kind,
                subject: p.subject.clone(),
                value: p.value.clone(),
                source: Source::External(msg.origin),
                tick: msg.tick,
            })
            .collect(),
    })
}

/// Stateful front end: monotonic frame check plus the fault window.
#[derive(Debug, Clone)]
pub struct Perception {
    pub suite: SensorSuite,
    pub authorized: BTreeSet<Origin>,
    last_frame: Option<Tick>,
    faults: FaultDetector,
}

impl Perception {
    pub fn new(suite: SensorSuite, authorized: BTreeSet<Origin>) -> Self {
        Perception {
            suite,
            authorized,
            last_frame: None,
            faults: FaultDetector::new(),
        }
    }

    pub fn extract_features(&mut self, frame: &SensorFrame) -> Result<FeatureSet, PerceptionError> {
        if let Some(last) = self.last_frame {
            if frame.tick <= last {
                return Err(PerceptionError::NonMonotonicFrame { last, got: frame.tick });
            }
        }
        let fs = extract_features(frame, &self.suite)?;
        self.last_frame = Some(frame.tick);
        Ok(fs)
    }

    pub fn ingest_external(&self, msg: &ExternalMessage) -> Result<FeatureSet, PerceptionError> {
        ingest_external(msg, &self.authorized)
    }

    pub fn detect_subsystem_faults(
        &mut self,
        reports: &[crate::operational::commands::ActuatorReport],
    ) -> Vec<SubsystemFault> {
        self.faults.detect_subsystem_faults(reports)
    }
}
