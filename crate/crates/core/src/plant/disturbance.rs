//! Typed disturbances from the environment, the vehicle and the passengers.
//!
//! The subtype list is open: new variants slot into one of the three
//! categories and the plant decides what they do.

use crate::ids::{NodeId, PassengerId, StopId, Tick};
use crate::representation::situation::Zone;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Category {
    Environment,
    Vehicle,
    Passenger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subtype", content = "params", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DisturbanceKind {
    /// Adjacent-lane occupancy at a stop, `[from, until)` in ms.
    EnvTraffic {
        stop: StopId,
        from: Tick,
        until: Tick,
    },
    EnvBlockedEdge {
        a: NodeId,
        b: NodeId,
    },
    EnvWeather {
        flag: String,
    },
    EnvTemperature {
        ambient_c: f64,
        cabin_c: Option<f64>,
    },
    EnvPlatformObstruction,
    VehDoorActuatorFault,
    VehPlatformFault,
    VehRangeLoss {
        meters: f64,
    },
    PaxMedicalEvent {
        subject: PassengerId,
        heart_rate: Option<f64>,
        fallen: bool,
        body_temp_c: Option<f64>,
    },
    PaxUnscriptedMovement {
        subject: PassengerId,
        zone: Zone,
    },
}

impl DisturbanceKind {
    pub fn category(&self) -> Category {
        use DisturbanceKind::*;
        match self {
            EnvTraffic { .. }
            | EnvBlockedEdge { .. }
            | EnvWeather { .. }
            | EnvTemperature { .. }
            | EnvPlatformObstruction => Category::Environment,
            VehDoorActuatorFault | VehPlatformFault | VehRangeLoss { .. } => Category::Vehicle,
            PaxMedicalEvent { .. } | PaxUnscriptedMovement { .. } => Category::Passenger,
        }
    }

    pub fn subtype_name(&self) -> &'static str {
        use DisturbanceKind::*;
        match self {
            EnvTraffic { .. } => "ENV_TRAFFIC",
            EnvBlockedEdge { .. } => "ENV_BLOCKED_EDGE",
            EnvWeather { .. } => "ENV_WEATHER",
            EnvTemperature { .. } => "ENV_TEMPERATURE",
            EnvPlatformObstruction => "ENV_PLATFORM_OBSTRUCTION",
            VehDoorActuatorFault => "VEH_DOOR_ACTUATOR_FAULT",
            VehPlatformFault => "VEH_PLATFORM_FAULT",
            VehRangeLoss { .. } => "VEH_RANGE_LOSS",
            PaxMedicalEvent { .. } => "PAX_MEDICAL_EVENT",
            PaxUnscriptedMovement { .. } => "PAX_UNSCRIPTED_MOVEMENT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    pub category: Category,
    #[serde(flatten)]
    pub kind: DisturbanceKind,
    pub onset: Tick,
    /// Exclusive end; `None` keeps it active for the rest of the run.
    pub expiry: Option<Tick>,
}

impl Disturbance {
    pub fn new(kind: DisturbanceKind, onset: Tick, expiry: Option<Tick>) -> Self {
        Disturbance {
            category: kind.category(),
            kind,
            onset,
            expiry,
        }
    }

    pub fn active_at(&self, tick: Tick) -> bool {
        self.onset <= tick && self.expiry.is_none_or(|e| tick < e)
    }

    pub fn consistent(&self) -> bool {
        self.category == self.kind.category()
    }
}

/// Every scheduled disturbance active at `tick`, in schedule order.
/// Overlapping disturbances are all returned.
pub fn activate_disturbances(schedule: &[Disturbance], tick: Tick) -> Vec<Disturbance> {
    debug_assert!(schedule.windows(2).all(|w| w[0].onset <= w[1].onset));
    schedule
        .iter()
        .take_while(|d| d.onset <= tick)
        .filter(|d| d.active_at(tick))
        .cloned()
        .collect()
}
