//! Tactical level: stop choice, door timing, boarding and the directive the
//! operational level executes.

pub mod behavior;
pub mod boarding;
pub mod stops;

use crate::ids::{NodeId, Tick};
use crate::operational::commands::Subsystem;
use crate::plant::map::StopPoint;
use serde::{Deserialize, Serialize};

pub use behavior::{plan_behavior, Tactical, TacticalConfig};
pub use boarding::{step_boarding, BoardingPhase, BoardingState, TaskKind};
pub use stops::{schedule_door, select_stop, DoorDecision, DoorSchedule, NoSuitableStop};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Level {
    Tactical,
    Operational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Nominal,
    Degraded,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "code", content = "subsystem", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReasonCode {
    DoorBlockedByTraffic,
    NoSuitableStop,
    RouteBlocked,
    ActuatorFault(Subsystem),
    GuardTimeout,
    StopRequested,
    EmergencyStopRequested,
}

impl ReasonCode {
    /// Reasons that leave the level unable to carry on.
    pub fn fatal(self) -> bool {
        matches!(self, ReasonCode::ActuatorFault(_) | ReasonCode::GuardTimeout)
    }
}

/// Status is NOMINAL exactly when there are no reasons.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub level: Level,
    pub status: Status,
    pub reasons: Vec<ReasonCode>,
}

impl PerformanceReport {
    pub fn nominal(level: Level) -> Self {
        PerformanceReport {
            level,
            status: Status::Nominal,
            reasons: Vec::new(),
        }
    }

    pub fn degraded(level: Level, reasons: Vec<ReasonCode>) -> Self {
        PerformanceReport {
            level,
            status: Status::Degraded,
            reasons,
        }
    }

    pub fn failed(level: Level, reasons: Vec<ReasonCode>) -> Self {
        PerformanceReport {
            level,
            status: Status::Failed,
            reasons,
        }
    }

    /// Status follows from the reasons: none is NOMINAL, any fatal one FAILED.
    pub fn from_reasons(level: Level, mut reasons: Vec<ReasonCode>) -> Self {
        reasons.sort();
        reasons.dedup();
        if reasons.is_empty() {
            Self::nominal(level)
        } else if reasons.iter().any(|r| r.fatal()) {
            Self::failed(level, reasons)
        } else {
            Self::degraded(level, reasons)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Maneuver {
    FollowRoute,
    PullOver,
    Hold,
    AlignToStop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PlatformDirective {
    #[default]
    None,
    Deploy,
    Lift,
    Stow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TacticalDirective {
    pub maneuver: Maneuver,
    pub target_stop: Option<StopPoint>,
    /// `None` means keep the door closed and locked.
    pub door_schedule: Option<DoorSchedule>,
    pub platform_cmd: PlatformDirective,
    pub speed_limit_mps: f64,
    /// Remaining route, starting at the node the vehicle is at or heading to.
    pub route: Vec<NodeId>,
    /// Distance from each route node to the end of the route, in metres.
    pub route_tail_m: Vec<f64>,
    pub eta_s: Option<f64>,
}

impl TacticalDirective {
    pub fn hold() -> Self {
        TacticalDirective {
            maneuver: Maneuver::Hold,
            target_stop: None,
            door_schedule: None,
            platform_cmd: PlatformDirective::None,
            speed_limit_mps: 0.0,
            route: Vec::new(),
            route_tail_m: Vec::new(),
            eta_s: None,
        }
    }

    pub fn pull_over() -> Self {
        TacticalDirective {
            maneuver: Maneuver::PullOver,
            ..Self::hold()
        }
    }

    /// Whether the door may be open at `now` under this directive.
    pub fn door_open_at(&self, now: Tick) -> bool {
        self.door_schedule.is_some_and(|d| d.open_at <= now)
    }
}

/// Tactical performance from the current conditions, merged with whatever
/// the operational level reported.
pub fn report_performance(own: &[ReasonCode], operational: &PerformanceReport) -> PerformanceReport {
    let mut reasons = own.to_vec();
    reasons.extend(operational.reasons.iter().copied());
    PerformanceReport::from_reasons(Level::Tactical, reasons)
}
