//! Vehicle ground truth and its per-tick dynamics.

use crate::ids::{NodeId, OPERATIONAL_PERIOD_MS};
use crate::operational::commands::{DoorCmd, LockCmd, PlatformCmd, Setpoint};
use crate::plant::map::RoadGraph;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Door travel time between fully closed and fully open.
pub const DOOR_TRAVEL_MS: u64 = 2_000;
/// Platform deploy, lift and stow each take this long.
pub const PLATFORM_TRAVEL_MS: u64 = 5_000;
/// Lateral re-alignment to another slot at the same node.
pub const ALIGN_MS: u64 = 3_000;
pub const MAX_ACCEL: f64 = 2.0;
pub const MAX_DECEL: f64 = 4.0;

const DT: f64 = OPERATIONAL_PERIOD_MS as f64 / 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DoorState {
    Closed,
    Opening,
    Open,
    Closing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LockState {
    Locked,
    Unlocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PlatformState {
    Stowed,
    Deploying,
    Deployed,
    Lifting,
    Lifted,
    Stowing,
}

impl PlatformState {
    pub fn in_motion(self) -> bool {
        matches!(
            self,
            PlatformState::Deploying | PlatformState::Lifting | PlatformState::Stowing
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Position {
    AtNode { node: NodeId },
    OnEdge { from: NodeId, to: NodeId, along_m: f64 },
}

impl Position {
    pub fn next_node(&self) -> &NodeId {
        match self {
            Position::AtNode { node } => node,
            Position::OnEdge { to, .. } => to,
        }
    }

    pub fn at_node(&self) -> Option<&NodeId> {
        match self {
            Position::AtNode { node } => Some(node),
            Position::OnEdge { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Position,
    pub speed_mps: f64,
    pub door: DoorState,
    /// 0 fully closed, 1 fully open.
    pub door_progress: f64,
    pub lock: LockState,
    pub platform: PlatformState,
    /// Progress through the current platform motion, 0..1.
    pub platform_progress: f64,
    /// Lateral slot the vehicle is aligned to while halted at a node.
    pub slot: Option<u32>,
    /// Target slot and remaining time of an ongoing re-alignment.
    pub aligning: Option<(u32, u64)>,
    pub range_m: f64,
    pub odometer_m: f64,
}

impl VehicleState {
    pub fn parked_at(node: NodeId, slot: Option<u32>, range_m: f64) -> Self {
        VehicleState {
            position: Position::AtNode { node },
            speed_mps: 0.0,
            door: DoorState::Closed,
            door_progress: 0.0,
            lock: LockState::Locked,
            platform: PlatformState::Stowed,
            platform_progress: 0.0,
            slot,
            aligning: None,
            range_m,
            odometer_m: 0.0,
        }
    }

    pub fn stationary(&self) -> bool {
        self.speed_mps == 0.0
    }

    /// Metres left to the node the vehicle is at or heading to.
    pub fn remaining_m(&self, map: &RoadGraph) -> f64 {
        match &self.position {
            Position::AtNode { .. } => 0.0,
            Position::OnEdge { from, to, along_m } => (map.edge_length_m(from, to).unwrap_or(0.0) - along_m).max(0.0),
        }
    }
}

/// Which actuators are currently ignoring their commands.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActuatorFaults {
    pub door: bool,
    pub platform: bool,
}

/// Physical context for one dynamics step.
pub(crate) struct StepContext<'a> {
    pub map: &'a RoadGraph,
    pub blocked_edges: &'a BTreeSet<(NodeId, NodeId)>,
    pub faults: &'a ActuatorFaults,
    pub platform_obstructed: bool,
    pub someone_on_platform: bool,
}

fn edge_blocked(blocked: &BTreeSet<(NodeId, NodeId)>, a: &NodeId, b: &NodeId) -> bool {
    blocked.contains(&(a.clone(), b.clone())) || blocked.contains(&(b.clone(), a.clone()))
}

/// Achieved setpoints after a step, one per commanded subsystem.
#[derive(Debug, Default)]
pub(crate) struct Achieved {
    pub accel: Option<Setpoint>,
    pub decel: Option<Setpoint>,
    pub steer: Option<Setpoint>,
    pub door: Option<Setpoint>,
    pub lock: Option<Setpoint>,
    pub platform: Option<Setpoint>,
}

pub(crate) struct Commands<'a> {
    pub accel: Option<f64>,
    pub decel: Option<f64>,
    pub steer: Option<(&'a Option<NodeId>, Option<u32>)>,
    pub door: Option<DoorCmd>,
    pub lock: Option<LockCmd>,
    pub platform: Option<PlatformCmd>,
}

impl VehicleState {
    /// Advances door, lock, platform and kinematics by one operational period.
    /// Physically impossible requests are refused; the refusal shows up as an
    /// achieved setpoint that differs from the command.
    pub(crate) fn step(&mut self, cmd: &Commands<'_>, ctx: &StepContext<'_>) -> Achieved {
        let mut out = Achieved::default();

        if let Some(want) = cmd.lock {
            if !ctx.faults.door {
                match want {
                    LockCmd::Unlocked => self.lock = LockState::Unlocked,
                    LockCmd::Locked if self.door == DoorState::Closed => self.lock = LockState::Locked,
                    LockCmd::Locked => {}
                }
            }
            out.lock = Some(Setpoint::Lock(match self.lock {
                LockState::Locked => LockCmd::Locked,
                LockState::Unlocked => LockCmd::Unlocked,
            }));
        }

        if let Some(want) = cmd.door {
            out.door = Some(Setpoint::Door(self.step_door(want, ctx)));
        }

        if let Some(want) = cmd.platform {
            out.platform = Some(Setpoint::Platform(self.step_platform(want, ctx)));
        }

        if let Some((heading, slot)) = cmd.steer {
            self.step_alignment(slot);
            out.steer = Some(Setpoint::Steer {
                heading: heading.clone(),
                slot,
            });
        }
        let heading = cmd.steer.and_then(|(h, _)| h.clone());
        let arrival_slot = cmd.steer.and_then(|(_, s)| s);

        let (accel_ok, decel) = self.step_motion(cmd, heading.as_ref(), arrival_slot, ctx);
        if let Some(a) = cmd.accel {
            out.accel = Some(Setpoint::Accel(if accel_ok { a } else { 0.0 }));
        }
        if cmd.decel.is_some() {
            out.decel = Some(Setpoint::Decel(decel));
        }
        out
    }

    fn step_door(&mut self, want: DoorCmd, ctx: &StepContext<'_>) -> DoorCmd {
        let step = OPERATIONAL_PERIOD_MS as f64 / DOOR_TRAVEL_MS as f64;
        if ctx.faults.door {
            return self.door_resting_cmd();
        }
        match want {
            DoorCmd::Open => {
                if self.lock == LockState::Locked || !self.stationary() || self.aligning.is_some() {
                    return self.door_resting_cmd();
                }
                if self.door != DoorState::Open {
                    self.door_progress = (self.door_progress + step).min(1.0);
                    self.door = if self.door_progress >= 1.0 {
                        DoorState::Open
                    } else {
                        DoorState::Opening
                    };
                }
                DoorCmd::Open
            }
            DoorCmd::Close => {
                if self.platform != PlatformState::Stowed {
                    return self.door_resting_cmd();
                }
                if self.door != DoorState::Closed {
                    self.door_progress = (self.door_progress - step).max(0.0);
                    self.door = if self.door_progress <= 0.0 {
                        DoorState::Closed
                    } else {
                        DoorState::Closing
                    };
                }
                DoorCmd::Close
            }
            DoorCmd::Hold => DoorCmd::Hold,
        }
    }

    fn door_resting_cmd(&self) -> DoorCmd {
        match self.door {
            DoorState::Open => DoorCmd::Open,
            DoorState::Closed => DoorCmd::Close,
            DoorState::Opening | DoorState::Closing => DoorCmd::Hold,
        }
    }

    fn step_platform(&mut self, want: PlatformCmd, ctx: &StepContext<'_>) -> PlatformCmd {
        let step = OPERATIONAL_PERIOD_MS as f64 / PLATFORM_TRAVEL_MS as f64;
        let resting = |s: PlatformState| match s {
            PlatformState::Stowed => PlatformCmd::Stow,
            PlatformState::Deployed => PlatformCmd::Deploy,
            PlatformState::Lifted => PlatformCmd::Lift,
            _ => PlatformCmd::Hold,
        };
        if want == PlatformCmd::Hold {
            return PlatformCmd::Hold;
        }
        if ctx.faults.platform || ctx.platform_obstructed || self.door != DoorState::Open {
            return resting(self.platform);
        }
        use PlatformState::*;
        let (moving, done) = match (want, self.platform) {
            (PlatformCmd::Deploy, Stowed | Deploying) => (Deploying, Deployed),
            (PlatformCmd::Lift, Deployed | Lifting) => (Lifting, Lifted),
            (PlatformCmd::Stow, Deployed | Lifted | Stowing) => {
                if ctx.someone_on_platform {
                    return resting(self.platform);
                }
                (Stowing, Stowed)
            }
            (PlatformCmd::Deploy, Deployed) | (PlatformCmd::Lift, Lifted) | (PlatformCmd::Stow, Stowed) => return want,
            _ => return resting(self.platform),
        };
        if self.platform != moving {
            self.platform = moving;
            self.platform_progress = 0.0;
        }
        self.platform_progress = (self.platform_progress + step).min(1.0);
        if self.platform_progress >= 1.0 - 1e-9 {
            self.platform = done;
            self.platform_progress = 0.0;
        }
        want
    }

    fn step_alignment(&mut self, slot: Option<u32>) {
        if let Some((target, left)) = self.aligning {
            let left = left.saturating_sub(OPERATIONAL_PERIOD_MS);
            if left == 0 {
                self.slot = Some(target);
                self.aligning = None;
            } else {
                self.aligning = Some((target, left));
            }
            return;
        }
        let Some(want) = slot else { return };
        if self.position.at_node().is_some()
            && self.stationary()
            && self.door == DoorState::Closed
            && self.slot != Some(want)
        {
            self.aligning = Some((want, ALIGN_MS));
        }
    }

    /// Returns whether traction was applied and the deceleration achieved.
    fn step_motion(
        &mut self,
        cmd: &Commands<'_>,
        heading: Option<&NodeId>,
        arrival_slot: Option<u32>,
        ctx: &StepContext<'_>,
    ) -> (bool, f64) {
        let accel = cmd.accel.unwrap_or(0.0).clamp(0.0, MAX_ACCEL);
        let decel = cmd.decel.unwrap_or(0.0).clamp(0.0, MAX_DECEL);
        let door_secure = self.door == DoorState::Closed && self.platform == PlatformState::Stowed;
        let mut accel_ok = cmd.accel.is_some() && accel == cmd.accel.unwrap_or(0.0);

        // Traction is refused with an unsecured door, while re-aligning, on
        // an empty battery, and at a node with nowhere legal to go.
        let departing_to = match &self.position {
            Position::AtNode { node } => {
                heading.filter(|h| ctx.map.travel_s(node, h).is_some() && !edge_blocked(ctx.blocked_edges, node, h))
            }
            Position::OnEdge { .. } => None,
        };
        let can_pull = door_secure
            && self.aligning.is_none()
            && self.range_m > 0.0
            && (self.position.at_node().is_none() || departing_to.is_some());
        let traction = if can_pull { accel } else { 0.0 };
        if accel > 0.0 && !can_pull {
            accel_ok = false;
        }

        let mut v = (self.speed_mps + (traction - decel) * DT).max(0.0);
        if !door_secure {
            v = 0.0;
        }
        if v > 0.0 {
            if let (Position::AtNode { node }, Some(to)) = (&self.position, departing_to) {
                self.position = Position::OnEdge {
                    from: node.clone(),
                    to: to.clone(),
                    along_m: 0.0,
                };
                self.slot = None;
            }
        }
        if let Position::OnEdge { .. } = self.position {
            let ds = (v * DT).min(self.range_m);
            if ds < v * DT {
                v = 0.0;
            }
            self.range_m = (self.range_m - ds).max(0.0);
            self.odometer_m += ds;
            self.advance(ds, heading, arrival_slot, ctx, &mut v);
        } else {
            v = 0.0;
        }
        self.speed_mps = v;
        (accel_ok, decel)
    }

    fn advance(
        &mut self,
        ds: f64,
        heading: Option<&NodeId>,
        arrival_slot: Option<u32>,
        ctx: &StepContext<'_>,
        v: &mut f64,
    ) {
        let Position::OnEdge { from, to, along_m } = &mut self.position else {
            return;
        };
        *along_m += ds;
        let len = ctx.map.edge_length_m(from, to).expect("vehicle is on a map edge");
        if *along_m + 1e-9 < len {
            return;
        }
        let overflow = (*along_m - len).max(0.0);
        let here = to.clone();
        let onward = heading
            .filter(|h| *v > 0.0 && ctx.map.travel_s(&here, h).is_some() && !edge_blocked(ctx.blocked_edges, &here, h));
        match onward {
            Some(next) => {
                self.position = Position::OnEdge {
                    from: here,
                    to: next.clone(),
                    along_m: overflow,
                };
            }
            None => {
                self.position = Position::AtNode { node: here };
                self.slot = arrival_slot;
                *v = 0.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::map::reference_graph;

    fn ctx<'a>(
        map: &'a RoadGraph,
        blocked: &'a BTreeSet<(NodeId, NodeId)>,
        faults: &'a ActuatorFaults,
    ) -> StepContext<'a> {
        StepContext {
            map,
            blocked_edges: blocked,
            faults,
            platform_obstructed: false,
            someone_on_platform: false,
        }
    }

    fn no_cmd() -> Commands<'static> {
        Commands {
            accel: None,
            decel: None,
            steer: None,
            door: None,
            lock: None,
            platform: None,
        }
    }

    #[test]
    fn door_opening_takes_two_seconds() {
        let map = reference_graph();
        let blocked = BTreeSet::new();
        let faults = ActuatorFaults::default();
        let mut v = VehicleState::parked_at("A".into(), Some(1), 1e5);
        v.lock = LockState::Unlocked;
        let mut ticks = 0;
        while v.door != DoorState::Open {
            let c = Commands {
                door: Some(DoorCmd::Open),
                ..no_cmd()
            };
            v.step(&c, &ctx(&map, &blocked, &faults));
            ticks += 1;
            assert!(ticks <= 20);
        }
        assert_eq!(ticks, 20);
    }

    #[test]
    fn locked_door_refuses_to_open() {
        let map = reference_graph();
        let blocked = BTreeSet::new();
        let faults = ActuatorFaults::default();
        let mut v = VehicleState::parked_at("A".into(), Some(1), 1e5);
        let c = Commands {
            door: Some(DoorCmd::Open),
            ..no_cmd()
        };
        let a = v.step(&c, &ctx(&map, &blocked, &faults));
        assert_eq!(a.door, Some(Setpoint::Door(DoorCmd::Close)));
        assert_eq!(v.door, DoorState::Closed);
    }

    #[test]
    fn no_traction_with_open_door() {
        let map = reference_graph();
        let blocked = BTreeSet::new();
        let faults = ActuatorFaults::default();
        let mut v = VehicleState::parked_at("A".into(), Some(1), 1e5);
        v.door = DoorState::Open;
        v.door_progress = 1.0;
        let heading = Some(NodeId::new("B"));
        let c = Commands {
            accel: Some(1.0),
            steer: Some((&heading, None)),
            ..no_cmd()
        };
        let a = v.step(&c, &ctx(&map, &blocked, &faults));
        assert_eq!(v.speed_mps, 0.0);
        assert_eq!(a.accel, Some(Setpoint::Accel(0.0)));
    }

    #[test]
    fn platform_needs_open_door() {
        let map = reference_graph();
        let blocked = BTreeSet::new();
        let faults = ActuatorFaults::default();
        let mut v = VehicleState::parked_at("A".into(), Some(1), 1e5);
        let c = Commands {
            platform: Some(PlatformCmd::Deploy),
            ..no_cmd()
        };
        v.step(&c, &ctx(&map, &blocked, &faults));
        assert_eq!(v.platform, PlatformState::Stowed);
    }

    #[test]
    fn blocked_edge_refuses_departure() {
        let map = reference_graph();
        let mut blocked = BTreeSet::new();
        blocked.insert((NodeId::new("B"), NodeId::new("A")));
        let faults = ActuatorFaults::default();
        let mut v = VehicleState::parked_at("A".into(), Some(1), 1e5);
        let heading = Some(NodeId::new("B"));
        let c = Commands {
            accel: Some(1.0),
            steer: Some((&heading, None)),
            ..no_cmd()
        };
        let a = v.step(&c, &ctx(&map, &blocked, &faults));
        assert_eq!(v.position.at_node(), Some(&NodeId::new("A")));
        assert_eq!(a.accel, Some(Setpoint::Accel(0.0)));
    }
}
