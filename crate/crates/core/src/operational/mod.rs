//! Operational level: turns the tactical directive into actuator commands
//! every tick, with reflexes that veto unsafe motion.

pub mod commands;

use crate::ids::Tick;
use crate::perception::faults::SubsystemFault;
use crate::perception::features::{FeatureKind, FeatureSet, FeatureValue, Subject};
use crate::plant::vehicle::{DoorState, LockState, PlatformState, MAX_ACCEL, MAX_DECEL};
use crate::representation::situation::ordered;
use crate::tactical::{Level, Maneuver, PerformanceReport, PlatformDirective, ReasonCode, TacticalDirective};
use commands::{ActuatorCommand, ActuatorReport, DoorCmd, LockCmd, PlatformCmd, Setpoint, Subsystem};

/// Proportional gain of the speed loop, 1/s.
pub const SPEED_GAIN: f64 = 1.0;
/// Deceleration the stop approach profile is shaped for, m/s².
pub const APPROACH_DECEL: f64 = 1.0;
/// Smallest brake applied while slowing to a stop.
pub const MIN_STOP_BRAKE: f64 = 0.5;
/// Creep speed that keeps the approach from stalling short of the node.
pub const CREEP_MPS: f64 = 0.3;

fn energy_left(fs: &FeatureSet) -> bool {
    fs.of_kind(FeatureKind::SubsystemHealth)
        .find_map(|f| match f.value {
            FeatureValue::Energy { range_m, .. } => Some(range_m > 0.0),
            _ => None,
        })
        .unwrap_or(true)
}

fn platform_stowed(fs: &FeatureSet) -> bool {
    fs.of_kind(FeatureKind::PlatformPosition).all(|f| {
        matches!(
            f.value,
            FeatureValue::Platform {
                state: PlatformState::Stowed,
                ..
            }
        )
    })
}

fn edge_reported_blocked(fs: &FeatureSet, a: &crate::ids::NodeId, b: &crate::ids::NodeId) -> bool {
    let want = ordered(a, b);
    fs.of_kind(FeatureKind::TrafficOccupancy).any(|f| {
        matches!(f.value, FeatureValue::EdgeBlocked)
            && matches!(&f.subject, Subject::Edge(e) if ordered(&e.0, &e.1) == want)
    })
}

/// Commands for this tick. Every tick carries exactly one DRIVETRAIN or
/// BRAKE command and one STEERING command.
pub fn execute(directive: &TacticalDirective, fs: &FeatureSet, tick: Tick) -> Vec<ActuatorCommand> {
    let mut out = Vec::new();
    let Some(pose) = fs.pose() else {
        out.push(ActuatorCommand::new(Subsystem::Brake, Setpoint::Decel(MAX_DECEL)));
        return out;
    };
    let v = pose.speed_mps;
    let at_node = pose.position.at_node().is_some();
    let idx = directive.route.iter().position(|n| n == &pose.next_node);
    let heading = idx.and_then(|i| directive.route.get(i + 1)).cloned();

    let door_secure = fs.door().is_some_and(|(d, _)| d == DoorState::Closed)
        && fs.lock() == Some(LockState::Locked)
        && platform_stowed(fs);

    let target = match directive.maneuver {
        Maneuver::FollowRoute | Maneuver::AlignToStop => {
            let to_end = pose.remaining_m + idx.map_or(0.0, |i| directive.route_tail_m[i]);
            let can_depart = heading
                .as_ref()
                .is_some_and(|h| !edge_reported_blocked(fs, &pose.next_node, h));
            let legal = !at_node || (can_depart && door_secure && !pose.aligning);
            if !legal || to_end <= 0.0 || !energy_left(fs) {
                0.0
            } else {
                let profile = (2.0 * APPROACH_DECEL * to_end).sqrt().max(CREEP_MPS);
                directive.speed_limit_mps.min(profile)
            }
        }
        Maneuver::PullOver | Maneuver::Hold => 0.0,
    };

    let u = SPEED_GAIN * (target - v);
    if u > 0.0 {
        out.push(ActuatorCommand::new(
            Subsystem::Drivetrain,
            Setpoint::Accel(u.min(MAX_ACCEL)),
        ));
    } else {
        let mut brake = (-u).min(MAX_DECEL);
        if target == 0.0 && v > 0.0 {
            brake = brake.max(MIN_STOP_BRAKE);
        }
        out.push(ActuatorCommand::new(Subsystem::Brake, Setpoint::Decel(brake)));
    }

    let slot = match directive.maneuver {
        Maneuver::AlignToStop | Maneuver::Hold => directive.target_stop.as_ref().map(|s| s.lateral_slot),
        _ => None,
    };
    out.push(ActuatorCommand::new(
        Subsystem::Steering,
        Setpoint::Steer { heading, slot },
    ));

    let door_state = fs.door().map(|(d, _)| d);
    let (door, lock) = match directive.door_schedule {
        Some(s) => (
            if tick >= s.open_at {
                DoorCmd::Open
            } else {
                DoorCmd::Close
            },
            if tick >= s.unlock_at {
                LockCmd::Unlocked
            } else {
                LockCmd::Locked
            },
        ),
        None => {
            let door = if platform_stowed(fs) {
                DoorCmd::Close
            } else {
                DoorCmd::Hold
            };
            let lock = if door_state == Some(DoorState::Closed) {
                LockCmd::Locked
            } else {
                LockCmd::Unlocked
            };
            (door, lock)
        }
    };
    // The lock only engages on a closed door.
    let lock = if lock == LockCmd::Locked && door_state != Some(DoorState::Closed) {
        LockCmd::Unlocked
    } else {
        lock
    };
    out.push(ActuatorCommand::new(Subsystem::Lock, Setpoint::Lock(lock)));
    out.push(ActuatorCommand::new(Subsystem::Door, Setpoint::Door(door)));

    let platform = match directive.platform_cmd {
        PlatformDirective::None => None,
        PlatformDirective::Deploy => Some(PlatformCmd::Deploy),
        PlatformDirective::Lift => Some(PlatformCmd::Lift),
        PlatformDirective::Stow => Some(PlatformCmd::Stow),
    };
    if let Some(p) = platform {
        out.push(ActuatorCommand::new(Subsystem::Platform, Setpoint::Platform(p)));
    }
    reflex_check(out, fs)
}

/// Vetoes door closing onto someone and platform motion into an obstruction.
pub fn reflex_check(proposed: Vec<ActuatorCommand>, fs: &FeatureSet) -> Vec<ActuatorCommand> {
    let doorway = fs.doorway_occupied();
    let obstructed = fs.platform_obstructed();
    proposed
        .into_iter()
        .map(|c| match c.setpoint {
            Setpoint::Door(DoorCmd::Close) if doorway => {
                ActuatorCommand::new(c.subsystem, Setpoint::Door(DoorCmd::Hold))
            }
            Setpoint::Platform(PlatformCmd::Deploy | PlatformCmd::Lift | PlatformCmd::Stow) if obstructed => {
                ActuatorCommand::new(c.subsystem, Setpoint::Platform(PlatformCmd::Hold))
            }
            _ => c,
        })
        .collect()
}

/// FAILED while any actuator fault stands; a passing mismatch is not one.
pub fn report_actuation(_reports: &[ActuatorReport], faults: &[SubsystemFault]) -> PerformanceReport {
    let mut subs: Vec<Subsystem> = faults.iter().map(|f| f.subsystem).collect();
    subs.sort();
    subs.dedup();
    PerformanceReport::from_reasons(
        Level::Operational,
        subs.into_iter().map(ReasonCode::ActuatorFault).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::NodeId;
    use crate::perception::faults::FaultMode;
    use crate::perception::features::{Feature, PoseValue, Source};
    use crate::plant::vehicle::Position;
    use crate::tactical::stops::DoorSchedule;
    use crate::tactical::Status;
    use commands::command_for;
    use proptest::prelude::*;

    fn feature(kind: FeatureKind, subject: Subject, value: FeatureValue) -> Feature {
        Feature {
            kind,
            subject,
            value,
            source: Source::Sensor("test".into()),
            tick: Tick::ZERO,
        }
    }

    fn vehicle_fs(position: Position, speed: f64, remaining: f64, door: DoorState, lock: LockState) -> FeatureSet {
        let next_node = position.next_node().clone();
        let mut fs = FeatureSet::empty(Tick::ZERO);
        fs.features.push(feature(
            FeatureKind::VehiclePose,
            Subject::Vehicle,
            FeatureValue::Pose(PoseValue {
                position,
                speed_mps: speed,
                next_node,
                remaining_m: remaining,
                slot: None,
                aligning: false,
            }),
        ));
        fs.features.push(feature(
            FeatureKind::DoorPosition,
            Subject::Vehicle,
            FeatureValue::Door {
                state: door,
                progress: 0.0,
            },
        ));
        fs.features.push(feature(
            FeatureKind::LockState,
            Subject::Vehicle,
            FeatureValue::Lock { state: lock },
        ));
        fs.features.push(feature(
            FeatureKind::PlatformPosition,
            Subject::Vehicle,
            FeatureValue::Platform {
                state: PlatformState::Stowed,
                progress: 0.0,
                obstructed: false,
            },
        ));
        fs
    }

    fn on_edge(along: f64, speed: f64) -> FeatureSet {
        vehicle_fs(
            Position::OnEdge {
                from: "A".into(),
                to: "B".into(),
                along_m: along,
            },
            speed,
            3000.0 - along,
            DoorState::Closed,
            LockState::Locked,
        )
    }

    fn follow(route: &[&str], tail: &[f64]) -> TacticalDirective {
        TacticalDirective {
            maneuver: Maneuver::FollowRoute,
            speed_limit_mps: 10.0,
            route: route.iter().map(|n| NodeId::new(*n)).collect(),
            route_tail_m: tail.to_vec(),
            ..TacticalDirective::hold()
        }
    }

    fn motion(cmds: &[ActuatorCommand]) -> Vec<&ActuatorCommand> {
        cmds.iter()
            .filter(|c| matches!(c.subsystem, Subsystem::Drivetrain | Subsystem::Brake))
            .collect()
    }

    #[test]
    fn cruise_accelerates_toward_limit() {
        let cmds = execute(&follow(&["B", "C"], &[3000.0, 0.0]), &on_edge(100.0, 7.0), Tick::ZERO);
        assert_eq!(command_for(&cmds, Subsystem::Drivetrain), Some(&Setpoint::Accel(2.0)));
        assert_eq!(
            command_for(&cmds, Subsystem::Steering),
            Some(&Setpoint::Steer {
                heading: Some("C".into()),
                slot: None
            })
        );
    }

    #[test]
    fn pull_over_from_five_stops_within_fifty_metres() {
        // Integrate the commanded deceleration at 100 ms steps.
        let d = TacticalDirective::pull_over();
        let (mut v, mut s) = (5.0f64, 0.0f64);
        let mut ticks = 0;
        while v > 0.0 {
            let cmds = execute(&d, &on_edge(100.0 + s, v), Tick::ZERO);
            let Some(Setpoint::Decel(b)) = command_for(&cmds, Subsystem::Brake) else {
                panic!("pull over must brake")
            };
            assert!(*b <= MAX_DECEL);
            let nv = (v - b * 0.1).max(0.0);
            s += nv * 0.1;
            v = nv;
            ticks += 1;
            assert!(ticks < 1000);
        }
        assert!(s <= 50.0, "stopped after {s} m");
    }

    #[test]
    fn holding_brake_at_rest() {
        let fs = vehicle_fs(
            Position::AtNode { node: "A".into() },
            0.0,
            0.0,
            DoorState::Closed,
            LockState::Locked,
        );
        let cmds = execute(&TacticalDirective::hold(), &fs, Tick::ZERO);
        assert_eq!(command_for(&cmds, Subsystem::Brake), Some(&Setpoint::Decel(0.0)));
    }

    #[test]
    fn no_traction_with_door_open() {
        let fs = vehicle_fs(
            Position::AtNode { node: "A".into() },
            0.0,
            0.0,
            DoorState::Open,
            LockState::Unlocked,
        );
        let cmds = execute(&follow(&["A", "B"], &[3000.0, 0.0]), &fs, Tick::ZERO);
        assert_eq!(command_for(&cmds, Subsystem::Drivetrain), None);
    }

    #[test]
    fn door_follows_schedule() {
        let fs = vehicle_fs(
            Position::AtNode { node: "A".into() },
            0.0,
            0.0,
            DoorState::Closed,
            LockState::Locked,
        );
        let d = TacticalDirective {
            door_schedule: Some(DoorSchedule {
                unlock_at: Tick(12_000),
                open_at: Tick(12_000),
            }),
            ..TacticalDirective::hold()
        };
        let before = execute(&d, &fs, Tick(11_900));
        assert_eq!(
            command_for(&before, Subsystem::Door),
            Some(&Setpoint::Door(DoorCmd::Close))
        );
        assert_eq!(
            command_for(&before, Subsystem::Lock),
            Some(&Setpoint::Lock(LockCmd::Locked))
        );
        let at = execute(&d, &fs, Tick(12_000));
        assert_eq!(command_for(&at, Subsystem::Door), Some(&Setpoint::Door(DoorCmd::Open)));
        assert_eq!(
            command_for(&at, Subsystem::Lock),
            Some(&Setpoint::Lock(LockCmd::Unlocked))
        );
    }

    #[test]
    fn doorway_holds_closing_door() {
        let mut fs = vehicle_fs(
            Position::AtNode { node: "A".into() },
            0.0,
            0.0,
            DoorState::Closing,
            LockState::Unlocked,
        );
        fs.features.push(feature(
            FeatureKind::Posture,
            Subject::External("h1".into()),
            FeatureValue::Zone {
                zone: crate::representation::situation::Zone::Doorway,
                distance_m: 0.5,
            },
        ));
        let cmds = execute(&TacticalDirective::hold(), &fs, Tick::ZERO);
        assert_eq!(
            command_for(&cmds, Subsystem::Door),
            Some(&Setpoint::Door(DoorCmd::Hold))
        );
    }

    #[test]
    fn latched_fault_fails_operational() {
        let rep = report_actuation(
            &[],
            &[SubsystemFault {
                subsystem: Subsystem::Door,
                mode: FaultMode::Stuck,
            }],
        );
        assert_eq!(rep.status, Status::Failed);
        assert_eq!(rep.reasons, vec![ReasonCode::ActuatorFault(Subsystem::Door)]);
        assert_eq!(report_actuation(&[], &[]).status, Status::Nominal);
    }

    proptest! {
        #[test]
        fn one_motion_command_within_limits(along in 0.0f64..2999.0, v in 0.0f64..15.0,
                                            m in 0usize..4) {
            let maneuver = [Maneuver::FollowRoute, Maneuver::PullOver, Maneuver::Hold, Maneuver::AlignToStop][m];
            let d = TacticalDirective { maneuver, ..follow(&["B", "C"], &[3000.0, 0.0]) };
            let cmds = execute(&d, &on_edge(along, v), Tick::ZERO);
            let m = motion(&cmds);
            prop_assert_eq!(m.len(), 1);
            match &m[0].setpoint {
                Setpoint::Accel(a) => prop_assert!(*a > 0.0 && *a <= MAX_ACCEL),
                Setpoint::Decel(b) => prop_assert!(*b >= 0.0 && *b <= MAX_DECEL),
                other => prop_assert!(false, "{other:?}"),
            }
            prop_assert_eq!(cmds.iter().filter(|c| c.subsystem == Subsystem::Steering).count(), 1);
        }
    }
}
