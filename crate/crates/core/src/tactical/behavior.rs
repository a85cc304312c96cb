//! Turning the strategic plan into a directive, one tactical period at a time.

use super::boarding::{step_boarding, BoardingState, TaskKind};
use super::stops::select_stop;
use super::{report_performance, Maneuver, PerformanceReport, ReasonCode, TacticalDirective};
use crate::ids::{PassengerId, StopId, Tick};
use crate::odd::PassengerProfile;
use crate::plant::map::{RoadGraph, StopPoint, NOMINAL_SPEED_MPS};
use crate::representation::situation::SituationModel;
use crate::strategic::{Action, StrategyPlan};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Extra boarding plus alighting time when someone rides the platform.
pub const PLATFORM_ALLOWANCE_S: f64 = 120.0;
/// Distance from the goal at which the approach switches to stop alignment.
pub const ALIGN_DISTANCE_M: f64 = 50.0;
/// How long a passenger-requested stop lasts once the vehicle stands.
pub const STOP_REQUEST_DWELL_MS: u64 = 60_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TacticalConfig {
    /// Lock release ahead of the door opening.
    #[serde(default)]
    pub unlock_lead_ms: u64,
}

/// The part of the plan route still ahead, with distances to its end.
fn remaining_route(plan: &StrategyPlan, sit: &SituationModel, map: &RoadGraph) -> (Vec<crate::ids::NodeId>, Vec<f64>) {
    let next = &sit.self_representation.next_node;
    let route = match plan.route.iter().position(|n| n == next) {
        Some(i) => plan.route[i..].to_vec(),
        None => vec![next.clone()],
    };
    let mut tail = vec![0.0; route.len()];
    for i in (0..route.len().saturating_sub(1)).rev() {
        tail[i] = tail[i + 1] + map.edge_length_m(&route[i], &route[i + 1]).unwrap_or(f64::INFINITY);
    }
    (route, tail)
}

/// The directive for this tactical period. An active boarding or arrival
/// task takes precedence over following the route.
pub fn plan_behavior(
    plan: &StrategyPlan,
    sit: &SituationModel,
    task: Option<&BoardingState>,
    map: &RoadGraph,
    manifest: &[&PassengerProfile],
    goal_stop: Option<&StopPoint>,
) -> TacticalDirective {
    if plan.action == Action::StopImmediately {
        return TacticalDirective::pull_over();
    }
    let (route, route_tail_m) = remaining_route(plan, sit, map);
    let to_end = sit.self_representation.remaining_m + route_tail_m.first().copied().unwrap_or(0.0);
    let allowance = if manifest.iter().any(|p| p.needs_platform) {
        PLATFORM_ALLOWANCE_S
    } else {
        0.0
    };
    let eta_s = Some(to_end / NOMINAL_SPEED_MPS + allowance);
    if let Some(t) = task {
        return TacticalDirective { eta_s, ..t.directive() };
    }
    TacticalDirective {
        maneuver: if to_end <= ALIGN_DISTANCE_M {
            Maneuver::AlignToStop
        } else {
            Maneuver::FollowRoute
        },
        target_stop: goal_stop.cloned(),
        door_schedule: None,
        platform_cmd: super::PlatformDirective::None,
        speed_limit_mps: NOMINAL_SPEED_MPS,
        route,
        route_tail_m,
        eta_s,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StopRequest {
    dwell_from: Option<Tick>,
}

/// Tactical state carried between periods.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tactical {
    pub config: TacticalConfig,
    pub task: Option<BoardingState>,
    /// The last boarding task that reached READY.
    pub completed: Option<BoardingState>,
    /// Stops given up on because of traffic.
    pub avoided_stops: BTreeSet<StopId>,
    stop_request: Option<StopRequest>,
    pub emergency_stop: bool,
    /// Conditions found in the last period.
    pub reasons: Vec<ReasonCode>,
}

impl Tactical {
    pub fn new(config: TacticalConfig) -> Self {
        Tactical {
            config,
            ..Self::default()
        }
    }

    fn usable_stops(&self, map: &RoadGraph, node: &crate::ids::NodeId) -> Vec<StopPoint> {
        map.stops_at(node)
            .into_iter()
            .filter(|s| !self.avoided_stops.contains(&s.id))
            .cloned()
            .collect()
    }

    /// Starts boarding whoever on the manifest is not yet aboard. Returns
    /// `false` if nobody needs to board.
    pub fn start_boarding(&mut self, map: &RoadGraph, sit: &SituationModel, manifest: &[&PassengerProfile]) -> bool {
        let riders: Vec<PassengerId> = manifest
            .iter()
            .filter(|p| !sit.actor(&p.id).is_some_and(|a| a.zone.onboard()))
            .map(|p| p.id.clone())
            .collect();
        if riders.is_empty() {
            return false;
        }
        let Some(node) = sit.self_representation.at_node().cloned() else {
            return false;
        };
        match select_stop(&node, &self.usable_stops(map, &node), manifest) {
            Ok(stop) => {
                let platform_riders = manifest
                    .iter()
                    .filter(|p| p.needs_platform && riders.contains(&p.id))
                    .map(|p| p.id.clone())
                    .collect();
                self.task = Some(BoardingState::new(
                    TaskKind::Boarding,
                    stop,
                    riders,
                    platform_riders,
                    self.config.unlock_lead_ms,
                    sit.tick,
                ));
                true
            }
            Err(_) => {
                self.reasons = vec![ReasonCode::NoSuitableStop];
                false
            }
        }
    }

    pub fn request_stop(&mut self) {
        self.stop_request = Some(StopRequest { dwell_from: None });
    }

    pub fn boarding_in_progress(&self) -> bool {
        self.task
            .as_ref()
            .is_some_and(|t| t.kind == TaskKind::Boarding && !t.done())
    }

    /// The vehicle stands at the goal stop with the door open and unlocked.
    pub fn handed_over(&self, sit: &SituationModel) -> bool {
        use crate::plant::vehicle::{DoorState, LockState};
        self.task
            .as_ref()
            .is_some_and(|t| t.kind == TaskKind::Deboarding && t.done())
            && sit.self_representation.door == DoorState::Open
            && sit.self_representation.lock == LockState::Unlocked
    }

    pub fn report(&self, operational: &PerformanceReport) -> PerformanceReport {
        report_performance(&self.reasons, operational)
    }

    /// One tactical period.
    pub fn step(
        &mut self,
        plan: &StrategyPlan,
        sit: &SituationModel,
        map: &RoadGraph,
        manifest: &[&PassengerProfile],
    ) -> TacticalDirective {
        let now = sit.tick;
        let mut reasons = Vec::new();

        if let Some(req) = &mut self.stop_request {
            if req.dwell_from.is_none() && sit.self_representation.stationary() {
                req.dwell_from = Some(now);
            }
            if req.dwell_from.is_some_and(|t| now.since(t) >= STOP_REQUEST_DWELL_MS) {
                self.stop_request = None;
            }
        }
        if self.emergency_stop {
            reasons.push(ReasonCode::EmergencyStopRequested);
        }
        if self.stop_request.is_some() {
            reasons.push(ReasonCode::StopRequested);
        }

        // An arrival task belongs to one goal; a new plan cancels it.
        if self.task.as_ref().is_some_and(|t| {
            t.kind == TaskKind::Deboarding && (t.stop.node != plan.goal_node || plan.action == Action::StopImmediately)
        }) {
            self.task = None;
        }

        if let Some(task) = &self.task {
            let mut t = step_boarding(task, sit);
            if t.deferred {
                reasons.push(ReasonCode::DoorBlockedByTraffic);
                let node = t.stop.node.clone();
                let others: Vec<StopPoint> = self
                    .usable_stops(map, &node)
                    .into_iter()
                    .filter(|s| s.id != t.stop.id)
                    .collect();
                if let Ok(alt) = select_stop(&node, &others, manifest) {
                    self.avoided_stops.insert(t.stop.id.clone());
                    t.retarget(alt, now);
                }
            }
            if t.timed_out {
                reasons.push(ReasonCode::GuardTimeout);
            }
            if t.kind == TaskKind::Boarding && t.done() {
                self.completed = Some(t);
                self.task = None;
            } else {
                self.task = Some(t);
            }
        }

        let goal_stop = if plan.action == Action::StopImmediately {
            None
        } else {
            match select_stop(&plan.goal_node, &self.usable_stops(map, &plan.goal_node), manifest) {
                Ok(s) => Some(s),
                Err(_) => {
                    reasons.push(ReasonCode::NoSuitableStop);
                    None
                }
            }
        };

        let me = &sit.self_representation;
        if self.task.is_none() && plan.action != Action::StopImmediately && me.stationary() {
            if let (Some(stop), Some(here)) = (&goal_stop, me.at_node()) {
                if here == &plan.goal_node {
                    let riders = sit.onboard().filter_map(|a| a.passenger_id().cloned()).collect();
                    let t = BoardingState::new(
                        TaskKind::Deboarding,
                        stop.clone(),
                        riders,
                        Vec::new(),
                        self.config.unlock_lead_ms,
                        now,
                    );
                    self.task = Some(step_boarding(&t, sit));
                }
            }
        }

        let stopping = self.emergency_stop || self.stop_request.is_some();
        let directive = if stopping {
            TacticalDirective::pull_over()
        } else {
            plan_behavior(plan, sit, self.task.as_ref(), map, manifest, goal_stop.as_ref())
        };

        if self.task.is_none() && directive.maneuver != Maneuver::PullOver {
            let blocked = directive
                .route
                .windows(2)
                .any(|e| sit.scenery.edge_blocked(&e[0], &e[1]));
            if blocked {
                reasons.push(ReasonCode::RouteBlocked);
            }
        }

        reasons.sort();
        reasons.dedup();
        self.reasons = reasons;
        directive
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::NodeId;
    use crate::plant::map::reference_graph;
    use crate::plant::vehicle::VehicleState;
    use crate::representation::situation::{Scenery, SelfRepresentation, Zone};
    use crate::tactical::{Level, PlatformDirective, Status};
    use std::collections::BTreeMap;

    fn plan_to(goal: &str, route: &[&str]) -> StrategyPlan {
        StrategyPlan {
            action: Action::Continue,
            goal_node: goal.into(),
            route: route.iter().map(|n| NodeId::new(*n)).collect(),
            alert: None,
            rationale: vec![],
        }
    }

    fn sit_at(tick: u64, v: &VehicleState, zone: Zone) -> SituationModel {
        let map = reference_graph();
        SituationModel::new(
            Tick(tick),
            Scenery::from_map(&map, BTreeMap::new()),
            SelfRepresentation::from_vehicle(v, &map),
            [(PassengerId::new("p1"), zone)],
        )
    }

    fn wheelchair() -> PassengerProfile {
        let mut p = PassengerProfile::adult("p1");
        p.needs_platform = true;
        p
    }

    #[test]
    fn eta_adds_platform_allowance() {
        let map = reference_graph();
        let v = VehicleState::parked_at("A".into(), Some(1), 1e5);
        let sit = sit_at(0, &v, Zone::CabinSeated);
        let plan = plan_to("C", &["A", "B", "C"]);
        let walker = PassengerProfile::adult("p1");
        let d0 = plan_behavior(&plan, &sit, None, &map, &[&walker], None);
        let p = wheelchair();
        let d1 = plan_behavior(&plan, &sit, None, &map, &[&p], None);
        assert_eq!(d0.eta_s, Some(600.0));
        assert_eq!(d1.eta_s, Some(720.0));
        assert_eq!(d0.route_tail_m, vec![6000.0, 3000.0, 0.0]);
        assert_eq!(d0.maneuver, Maneuver::FollowRoute);
    }

    #[test]
    fn stop_plan_pulls_over() {
        let map = reference_graph();
        let mut v = VehicleState::parked_at("A".into(), Some(1), 1e5);
        v.speed_mps = 5.0;
        let sit = sit_at(0, &v, Zone::CabinSeated);
        let plan = StrategyPlan {
            action: Action::StopImmediately,
            route: vec![],
            ..plan_to("A", &[])
        };
        let d = plan_behavior(&plan, &sit, None, &map, &[], None);
        assert_eq!(d.maneuver, Maneuver::PullOver);
        assert_eq!(d.platform_cmd, PlatformDirective::None);
        assert!(d.door_schedule.is_none());
    }

    #[test]
    fn arrival_starts_handover() {
        let map = reference_graph();
        let v = VehicleState::parked_at("C".into(), Some(1), 1e5);
        let sit = sit_at(600_000, &v, Zone::CabinSeated);
        let mut t = Tactical::default();
        let p = PassengerProfile::adult("p1");
        let d = t.step(&plan_to("C", &["A", "B", "C"]), &sit, &map, &[&p]);
        let task = t.task.as_ref().unwrap();
        assert_eq!(task.kind, TaskKind::Deboarding);
        assert_eq!(task.stop.id.as_str(), "C1");
        assert!(d.door_open_at(Tick(600_000)));
        assert_eq!(
            t.report(&PerformanceReport::nominal(Level::Operational)).status,
            Status::Nominal
        );
    }

    #[test]
    fn saturated_stop_degrades_then_moves_over() {
        let map = reference_graph();
        let v = VehicleState::parked_at("A".into(), Some(1), 1e5);
        let mut sit = sit_at(0, &v, Zone::OutsideNear);
        sit.scenery.traffic.insert(
            "A1".into(),
            vec![crate::perception::features::Interval::new(0, 120_000)],
        );
        let p = PassengerProfile::adult("p1");
        let mut t = Tactical::default();
        assert!(t.start_boarding(&map, &sit, &[&p]));
        t.step(&plan_to("C", &["A", "B", "C"]), &sit, &map, &[&p]);
        let rep = t.report(&PerformanceReport::nominal(Level::Operational));
        assert_eq!(rep.status, Status::Degraded);
        assert_eq!(rep.reasons, vec![ReasonCode::DoorBlockedByTraffic]);
        assert_eq!(t.task.as_ref().unwrap().stop.id.as_str(), "A2");
    }

    #[test]
    fn requested_stop_dwells_then_resumes() {
        let map = reference_graph();
        let v = VehicleState::parked_at("B".into(), None, 1e5);
        let p = PassengerProfile::adult("p1");
        let plan = plan_to("C", &["B", "C"]);
        let mut t = Tactical::default();
        t.request_stop();
        let d = t.step(&plan, &sit_at(100_000, &v, Zone::CabinSeated), &map, &[&p]);
        assert_eq!(d.maneuver, Maneuver::PullOver);
        assert_eq!(t.reasons, vec![ReasonCode::StopRequested]);
        t.step(&plan, &sit_at(159_000, &v, Zone::CabinSeated), &map, &[&p]);
        assert_eq!(t.reasons, vec![ReasonCode::StopRequested]);
        let d = t.step(&plan, &sit_at(160_000, &v, Zone::CabinSeated), &map, &[&p]);
        assert_eq!(d.maneuver, Maneuver::FollowRoute);
        assert!(t.reasons.is_empty());
    }

    #[test]
    fn blocked_route_is_reported() {
        let map = reference_graph();
        let v = VehicleState::parked_at("A".into(), Some(1), 1e5);
        let mut sit = sit_at(0, &v, Zone::CabinSeated);
        sit.scenery.blocked_edges.insert(("B".into(), "C".into()));
        let p = PassengerProfile::adult("p1");
        let mut t = Tactical::default();
        t.step(&plan_to("C", &["A", "B", "C"]), &sit, &map, &[&p]);
        assert_eq!(t.reasons, vec![ReasonCode::RouteBlocked]);
    }
}
