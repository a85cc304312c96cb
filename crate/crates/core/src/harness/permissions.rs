//! Who may intervene at which level, and routing of scripted user events.

use super::scenario::{ScenarioSpec, UserEvent};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActorRole {
    Passenger,
    /// A passenger under 18.
    Child,
    ExternalHelper,
    ExternalOther,
    GuardianRemote,
    ControlRoom,
    Infrastructure,
    OtherVehicle,
}

impl ActorRole {
    pub const ALL: [ActorRole; 8] = [
        ActorRole::Passenger,
        ActorRole::Child,
        ActorRole::ExternalHelper,
        ActorRole::ExternalOther,
        ActorRole::GuardianRemote,
        ActorRole::ControlRoom,
        ActorRole::Infrastructure,
        ActorRole::OtherVehicle,
    ];

    /// Remote parties are addressed by their role name.
    pub fn remote(name: &str) -> Option<ActorRole> {
        match name {
            "GUARDIAN_REMOTE" => Some(ActorRole::GuardianRemote),
            "CONTROL_ROOM" => Some(ActorRole::ControlRoom),
            "INFRASTRUCTURE" => Some(ActorRole::Infrastructure),
            "OTHER_VEHICLE" => Some(ActorRole::OtherVehicle),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventLevel {
    Strategic,
    Tactical,
    Operational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    SetMission,
    ChangeDestination,
    RequestStop,
    EmergencyStop,
    ExternalMessage,
}

impl EventKind {
    pub const ALL: [EventKind; 5] = [
        EventKind::SetMission,
        EventKind::ChangeDestination,
        EventKind::RequestStop,
        EventKind::EmergencyStop,
        EventKind::ExternalMessage,
    ];

    /// The level an event of this kind is handled at.
    pub fn home_level(self) -> EventLevel {
        match self {
            EventKind::SetMission | EventKind::ChangeDestination | EventKind::ExternalMessage => EventLevel::Strategic,
            EventKind::RequestStop | EventKind::EmergencyStop => EventLevel::Tactical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PermissionRule {
    pub role: ActorRole,
    pub level: EventLevel,
    pub kind: EventKind,
    pub allow: bool,
}

/// Role × level × kind → allowed. Every cell is filled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermissionMatrix(BTreeMap<(ActorRole, EventLevel, EventKind), bool>);

impl Serialize for PermissionMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rules: Vec<PermissionRule> = self
            .0
            .iter()
            .map(|(&(role, level, kind), &allow)| PermissionRule {
                role,
                level,
                kind,
                allow,
            })
            .collect();
        rules.serialize(s)
    }
}

fn default_allow(role: ActorRole, level: EventLevel, kind: EventKind) -> bool {
    use ActorRole::*;
    use EventKind::*;
    // Nobody writes to the operational level directly.
    if level != kind.home_level() {
        return false;
    }
    match kind {
        SetMission | ChangeDestination => matches!(role, Passenger | GuardianRemote | ControlRoom),
        RequestStop => matches!(role, Passenger | Child | GuardianRemote | ControlRoom),
        EmergencyStop => matches!(role, Passenger | Child | ExternalHelper | GuardianRemote | ControlRoom),
        ExternalMessage => matches!(role, GuardianRemote | ControlRoom | Infrastructure),
    }
}

impl Default for PermissionMatrix {
    fn default() -> Self {
        let mut m = BTreeMap::new();
        for role in ActorRole::ALL {
            for level in [EventLevel::Strategic, EventLevel::Tactical, EventLevel::Operational] {
                for kind in EventKind::ALL {
                    m.insert((role, level, kind), default_allow(role, level, kind));
                }
            }
        }
        PermissionMatrix(m)
    }
}

impl PermissionMatrix {
    pub fn with_overrides(rules: &[PermissionRule]) -> Self {
        let mut m = Self::default();
        for r in rules {
            m.0.insert((r.role, r.level, r.kind), r.allow);
        }
        m
    }

    pub fn allows(&self, role: ActorRole, level: EventLevel, kind: EventKind) -> bool {
        self.0.get(&(role, level, kind)).copied().unwrap_or(false)
    }
}

/// What an accepted event turns into.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "input", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RoutedInput {
    /// Goes to strategic mission acceptance.
    Mission {
        goal_node: crate::ids::NodeId,
        replace_manifest: Option<Vec<crate::ids::PassengerId>>,
    },
    /// Tactical pull-over with a dwell.
    StopRequest,
    /// Tactical pull-over; strategic follows with a stop plan.
    EmergencyStop,
    /// Fed to perception as an external message.
    External(crate::perception::ExternalMessage),
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "error", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Rejection {
    #[error("{role:?} may not send {kind:?} at the {level:?} level")]
    PermissionDenied {
        role: ActorRole,
        level: EventLevel,
        kind: EventKind,
    },
    #[error("undeclared actor `{actor}`")]
    UnknownActor { actor: String },
    /// The run ended before the event's tick.
    #[error("run ended at {ended} ms")]
    NotReached { ended: u64 },
}

pub fn route_user_event(ev: &UserEvent, spec: &ScenarioSpec) -> Result<RoutedInput, Rejection> {
    let role = spec.role_of(&ev.actor).ok_or_else(|| Rejection::UnknownActor {
        actor: ev.actor.clone(),
    })?;
    if !spec.permissions.allows(role, ev.level, ev.kind) {
        return Err(Rejection::PermissionDenied {
            role,
            level: ev.level,
            kind: ev.kind,
        });
    }
    Ok(match ev.kind {
        EventKind::SetMission | EventKind::ChangeDestination => RoutedInput::Mission {
            goal_node: ev.payload.goal_node.clone().expect("validated"),
            replace_manifest: ev.payload.manifest.clone(),
        },
        EventKind::RequestStop => RoutedInput::StopRequest,
        EventKind::EmergencyStop => RoutedInput::EmergencyStop,
        EventKind::ExternalMessage => RoutedInput::External(crate::perception::ExternalMessage {
            tick: ev.tick,
            origin: match role {
                ActorRole::ControlRoom => crate::perception::features::Origin::ControlRoom,
                ActorRole::GuardianRemote => crate::perception::features::Origin::GuardianRemote,
                ActorRole::Infrastructure => crate::perception::features::Origin::Infrastructure,
                _ => crate::perception::features::Origin::OtherVehicle,
            },
            payload: ev.payload.features.clone(),
        }),
    })
}
