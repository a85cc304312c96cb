//! Boarding and arrival handover as a guarded state machine.

use super::stops::{schedule_door, DoorDecision, DoorSchedule};
use super::{Maneuver, PlatformDirective, TacticalDirective};
use crate::ids::{PassengerId, Tick};
use crate::plant::map::StopPoint;
use crate::plant::vehicle::{DoorState, LockState, PlatformState};
use crate::representation::situation::{SituationModel, Zone};
use serde::{Deserialize, Serialize};

/// A phase whose guard stays unmet this long fails the task.
pub const GUARD_TIMEOUT_MS: u64 = 120_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BoardingPhase {
    AlignToStop,
    DoorOpening,
    PlatformDeploy,
    PlatformLift,
    PassengerSecuring,
    PlatformStow,
    DoorClosing,
    Ready,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TaskKind {
    Boarding,
    /// Ends with the door open at the goal stop.
    Deboarding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoardingState {
    pub kind: TaskKind,
    pub phase: BoardingPhase,
    pub stop: StopPoint,
    pub riders: Vec<PassengerId>,
    /// Riders who board by platform; non-empty means the platform sequence runs.
    pub platform_riders: Vec<PassengerId>,
    pub door: Option<DoorSchedule>,
    /// No door opening fits the lookahead right now.
    pub deferred: bool,
    /// When the current phase was entered.
    pub since: Tick,
    pub timed_out: bool,
    pub trace: Vec<BoardingPhase>,
    pub unlock_lead_ms: u64,
}

impl BoardingState {
    pub fn new(
        kind: TaskKind,
        stop: StopPoint,
        riders: Vec<PassengerId>,
        platform_riders: Vec<PassengerId>,
        unlock_lead_ms: u64,
        tick: Tick,
    ) -> Self {
        BoardingState {
            kind,
            phase: BoardingPhase::AlignToStop,
            stop,
            riders,
            platform_riders: if kind == TaskKind::Boarding {
                platform_riders
            } else {
                Vec::new()
            },
            door: None,
            deferred: false,
            since: tick,
            timed_out: false,
            trace: vec![BoardingPhase::AlignToStop],
            unlock_lead_ms,
        }
    }

    pub fn done(&self) -> bool {
        self.phase == BoardingPhase::Ready
    }

    fn enter(&mut self, phase: BoardingPhase, tick: Tick) {
        self.phase = phase;
        self.since = tick;
        self.trace.push(phase);
    }

    /// Restarts at a different stop of the same node.
    pub fn retarget(&mut self, stop: StopPoint, tick: Tick) {
        self.stop = stop;
        self.door = None;
        self.deferred = false;
        self.enter(BoardingPhase::AlignToStop, tick);
    }

    /// The directive this phase asks of the operational level.
    pub fn directive(&self) -> TacticalDirective {
        use BoardingPhase::*;
        let platform_cmd = match self.phase {
            PlatformDeploy => PlatformDirective::Deploy,
            PlatformLift => PlatformDirective::Lift,
            PlatformStow => PlatformDirective::Stow,
            _ => PlatformDirective::None,
        };
        let door_schedule = match (self.phase, self.kind) {
            (AlignToStop | DoorClosing, _) | (Ready, TaskKind::Boarding) => None,
            _ => self.door,
        };
        TacticalDirective {
            maneuver: if self.phase == AlignToStop {
                Maneuver::AlignToStop
            } else {
                Maneuver::Hold
            },
            target_stop: Some(self.stop.clone()),
            door_schedule,
            platform_cmd,
            ..TacticalDirective::hold()
        }
    }
}

fn zone_of(sit: &SituationModel, id: &PassengerId) -> Option<Zone> {
    sit.actor(id).map(|a| a.zone)
}

fn all_in(sit: &SituationModel, ids: &[PassengerId], ok: impl Fn(Zone) -> bool) -> bool {
    ids.iter().all(|id| zone_of(sit, id).is_some_and(&ok))
}

fn aligned(sit: &SituationModel, stop: &StopPoint) -> bool {
    let me = &sit.self_representation;
    me.stationary() && me.at_node() == Some(&stop.node) && me.slot == Some(stop.lateral_slot) && !me.aligning
}

fn guard(s: &BoardingState, sit: &SituationModel) -> Option<BoardingPhase> {
    use BoardingPhase::*;
    let me = &sit.self_representation;
    let platform = !s.platform_riders.is_empty();
    match s.phase {
        AlignToStop => aligned(sit, &s.stop).then_some(DoorOpening),
        DoorOpening if me.door != DoorState::Open || me.lock != LockState::Unlocked => None,
        DoorOpening => match (s.kind, platform) {
            (TaskKind::Deboarding, _) => Some(Ready),
            // Reopened by the reflex after everyone was already in: wait for
            // the doorway to clear, then close again.
            (TaskKind::Boarding, _)
                if s.trace.contains(&DoorClosing)
                    && me.platform == PlatformState::Stowed
                    && all_in(sit, &s.riders, |z| z == Zone::CabinSeated) =>
            {
                (!sit.anyone_in(Zone::Doorway)).then_some(DoorClosing)
            }
            (TaskKind::Boarding, true) => Some(PlatformDeploy),
            (TaskKind::Boarding, false) => Some(PassengerSecuring),
        },
        PlatformDeploy => (me.platform == PlatformState::Deployed
            && all_in(sit, &s.platform_riders, |z| z == Zone::OnPlatform))
        .then_some(PlatformLift),
        PlatformLift => (me.platform == PlatformState::Lifted).then_some(PassengerSecuring),
        PassengerSecuring => all_in(sit, &s.riders, |z| z == Zone::CabinSeated).then_some(if platform {
            PlatformStow
        } else {
            DoorClosing
        }),
        PlatformStow => (me.platform == PlatformState::Stowed).then_some(DoorClosing),
        DoorClosing if sit.anyone_in(Zone::Doorway) => Some(DoorOpening),
        DoorClosing => (me.door == DoorState::Closed && me.lock == LockState::Locked).then_some(Ready),
        Ready => None,
    }
}

/// Advances the task as far as the current situation allows. Door timing is
/// refreshed while the opening still lies ahead.
pub fn step_boarding(state: &BoardingState, sit: &SituationModel) -> BoardingState {
    let now = sit.tick;
    let mut s = state.clone();
    if s.done() || s.timed_out {
        return s;
    }
    let mut moved = false;
    // Each phase is visited at most once per step except the reflex edge,
    // which needs a fresh tick to fire again.
    for _ in 0..8 {
        if s.phase == BoardingPhase::DoorOpening && s.door.is_none_or(|d| now < d.open_at) {
            let traffic = sit.scenery.traffic.get(&s.stop.id).map(Vec::as_slice).unwrap_or(&[]);
            match schedule_door(sit, traffic, now, s.unlock_lead_ms) {
                DoorDecision::Scheduled(d) => {
                    s.door = Some(d);
                    s.deferred = false;
                }
                DoorDecision::Deferred => {
                    s.door = None;
                    s.deferred = true;
                }
            }
        }
        match guard(&s, sit) {
            Some(next) => {
                let reflex = next == BoardingPhase::DoorOpening && s.phase == BoardingPhase::DoorClosing;
                if reflex {
                    // Reopen right away; the doorway is not traffic-gated.
                    s.door = Some(DoorSchedule {
                        unlock_at: now,
                        open_at: now,
                    });
                }
                s.enter(next, now);
                moved = true;
                if reflex || next == BoardingPhase::Ready {
                    break;
                }
            }
            None => break,
        }
    }
    if !moved && now.since(s.since) >= GUARD_TIMEOUT_MS {
        s.timed_out = true;
    }
    s
}
