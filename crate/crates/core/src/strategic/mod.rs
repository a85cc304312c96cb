//! Strategic level: mission intake, routing, course-of-action selection and
//! external alerts.

pub mod routing;
pub mod scoring;

use crate::ids::{NodeId, PassengerId};
use crate::odd::{check_mission, profile_of, MissionContext, OddSpec, PassengerProfile, Verdict};
use crate::representation::hazards::{dominant, Hazard, HazardKind};
use crate::representation::world::{goal_candidates, predict_world, WorldModel, WorldProjection};
use crate::tactical::{PerformanceReport, ReasonCode, Status};
use routing::{plan_route, RouteConstraints, RouteError};
use scoring::{score_option, OptionCandidate};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

pub use scoring::{Action, HarmScore};

/// How far ahead course-of-action projections look.
pub const PROJECTION_HORIZON_S: f64 = 4.0 * 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Urgency {
    Leisure,
    #[default]
    Normal,
    Urgent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Requester {
    #[default]
    Passenger,
    GuardianRemote,
    ControlRoom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionObjective {
    pub goal_node: NodeId,
    pub manifest: Vec<PassengerId>,
    #[serde(default)]
    pub urgency: Urgency,
    #[serde(default)]
    pub requester: Requester,
    #[serde(default)]
    pub deadline: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Recipient {
    ControlRoom,
    Rescue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlertRequest {
    pub recipient: Recipient,
    pub hazard: Hazard,
    /// Where the vehicle is, or the node it is about to reach.
    pub node: NodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredOption {
    pub action: Action,
    pub goal: Option<NodeId>,
    pub feasible: bool,
    pub score: HarmScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyPlan {
    pub action: Action,
    pub goal_node: NodeId,
    /// Empty when stopping immediately.
    pub route: Vec<NodeId>,
    pub alert: Option<AlertRequest>,
    pub rationale: Vec<ScoredOption>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AcceptError {
    #[error("invalid mission objective: {0}")]
    Invalid(String),
    #[error(transparent)]
    NoRoute(#[from] RouteError),
    #[error("mission outside the operational design domain: {0:?}")]
    Rejected(Verdict),
}

/// Route exclusions the ODD imposes on this manifest.
pub fn mission_exclusions(
    obj: &MissionObjective,
    profiles: &[PassengerProfile],
    odd: &OddSpec,
    w: &WorldModel,
) -> BTreeSet<NodeId> {
    let manifest: Vec<&PassengerProfile> = obj.manifest.iter().filter_map(|id| profile_of(profiles, id)).collect();
    odd.route_exclusions(&w.map, &manifest)
}

/// Plans a route under the ODD's area constraints and accepts the mission
/// iff the ODD check passes on that route.
pub fn accept_mission(
    obj: &MissionObjective,
    profiles: &[PassengerProfile],
    odd: &OddSpec,
    w: &WorldModel,
    env_flags: &BTreeSet<String>,
) -> Result<StrategyPlan, AcceptError> {
    if obj.manifest.is_empty() {
        return Err(AcceptError::Invalid("manifest is empty".into()));
    }
    if !w.map.contains(&obj.goal_node) {
        return Err(AcceptError::Invalid(format!(
            "goal `{}` is not on the map",
            obj.goal_node
        )));
    }
    if let Some(id) = obj.manifest.iter().find(|id| profile_of(profiles, id).is_none()) {
        return Err(AcceptError::Invalid(format!("passenger `{id}` has no profile")));
    }
    let constraints = RouteConstraints {
        excluded_nodes: mission_exclusions(obj, profiles, odd, w),
        excluded_edges: w.blocked_edges.clone(),
        max_duration: None,
    };
    let route = plan_route(&w.map, &w.planning_node, &obj.goal_node, &constraints)?;
    let ctx = MissionContext {
        map: &w.map,
        env_flags,
        nearest_assistant_m: w.nearest_assistant_m,
    };
    let verdict = check_mission(odd, obj, profiles, &route, &ctx);
    if !verdict.ok() {
        return Err(AcceptError::Rejected(verdict));
    }
    Ok(StrategyPlan {
        action: Action::Continue,
        goal_node: obj.goal_node.clone(),
        route: route.nodes,
        alert: None,
        rationale: Vec::new(),
    })
}

fn forced_stop(perf: &PerformanceReport) -> bool {
    perf.status == Status::Failed || perf.reasons.contains(&ReasonCode::EmergencyStopRequested)
}

/// The four options for this moment, DIVERT already narrowed to its best goal.
pub fn enumerate_options(
    current: &StrategyPlan,
    w: &WorldModel,
    proj: &WorldProjection,
    hazards: &[Hazard],
    perf: &PerformanceReport,
) -> Vec<ScoredOption> {
    let stop_only = forced_stop(perf);
    let no_stop_at_goal = perf.reasons.contains(&ReasonCode::NoSuitableStop);
    let reachable = |g: &NodeId| proj.candidates.get(g).is_some_and(|c| c.range_feasible);
    let scored = |action, goal: Option<NodeId>, feasible: bool| {
        let c = OptionCandidate { action, goal };
        let score = score_option(&c, proj, hazards, w);
        ScoredOption {
            action,
            goal: c.goal,
            feasible,
            score,
        }
    };

    let cont = scored(
        Action::Continue,
        Some(current.goal_node.clone()),
        !stop_only && !no_stop_at_goal && reachable(&current.goal_node),
    );
    let divert = goal_candidates(w)
        .into_iter()
        .filter(|g| g != &current.goal_node && g != &w.departure_node && reachable(g))
        .map(|g| scored(Action::Divert, Some(g), !stop_only))
        .min_by(|a, b| a.score.cmp(&b.score).then_with(|| a.goal.cmp(&b.goal)))
        .unwrap_or_else(|| scored(Action::Divert, None, false));
    let ret = scored(
        Action::Return,
        Some(w.departure_node.clone()),
        !stop_only && reachable(&w.departure_node),
    );
    let stop = scored(Action::StopImmediately, None, true);
    vec![cont, divert, ret, stop]
}

fn alert_for(hazards: &[Hazard], node: &NodeId) -> Option<AlertRequest> {
    let h = dominant(hazards).filter(|h| h.severity >= 2)?;
    Some(AlertRequest {
        recipient: if h.kind == HazardKind::MedicalEmergency {
            Recipient::Rescue
        } else {
            Recipient::ControlRoom
        },
        hazard: h.clone(),
        node: node.clone(),
    })
}

/// Picks the least harmful feasible course of action. With nothing wrong the
/// current plan stands.
pub fn replan(current: &StrategyPlan, w: &WorldModel, hazards: &[Hazard], perf: &PerformanceReport) -> StrategyPlan {
    if hazards.is_empty() && perf.status == Status::Nominal {
        return current.clone();
    }
    let proj = predict_world(w, PROJECTION_HORIZON_S).expect("horizon is positive");
    let options = enumerate_options(current, w, &proj, hazards, perf);
    let best = options
        .iter()
        .filter(|o| o.feasible)
        .min_by(|a, b| a.score.cmp(&b.score).then(a.action.cmp(&b.action)))
        .expect("stopping is always feasible");
    let (goal_node, route) = match (&best.goal, best.action) {
        (Some(g), a) if a != Action::StopImmediately => (g.clone(), proj.candidates[g].route.nodes.clone()),
        _ => (w.planning_node.clone(), Vec::new()),
    };
    StrategyPlan {
        action: best.action,
        goal_node,
        route,
        alert: alert_for(hazards, &w.planning_node),
        rationale: options,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::Tick;
    use crate::odd::Dimension;
    use crate::perception::features::FeatureKind;
    use crate::plant::map::reference_graph;
    use crate::representation::world::{HealthTrend, PassengerProjection};
    use crate::tactical::Level;

    fn world(at: &str) -> WorldModel {
        let mut w = WorldModel::new(
            reference_graph(),
            vec![PassengerProfile::adult("p1")],
            at.into(),
            5e4,
            vec![],
        );
        w.mission_goal = "C".into();
        w
    }

    fn obj(goal: &str) -> MissionObjective {
        MissionObjective {
            goal_node: goal.into(),
            manifest: vec!["p1".into()],
            urgency: Urgency::Normal,
            requester: Requester::Passenger,
            deadline: None,
        }
    }

    fn nominal() -> PerformanceReport {
        PerformanceReport::nominal(Level::Tactical)
    }

    #[test]
    fn accept_a_to_c() {
        let w = world("A");
        let p = accept_mission(
            &obj("C"),
            &[PassengerProfile::adult("p1")],
            &OddSpec::default(),
            &w,
            &BTreeSet::new(),
        )
        .unwrap();
        assert_eq!(p.action, Action::Continue);
        assert_eq!(p.route, vec![NodeId::new("A"), "B".into(), "C".into()]);
        let cost: u64 = p.route.windows(2).map(|e| w.map.travel_s(&e[0], &e[1]).unwrap()).sum();
        assert_eq!(cost, 600);
    }

    #[test]
    fn young_solo_rider_rejected() {
        let w = world("A");
        let mut kid = PassengerProfile::adult("p1");
        kid.age = 8;
        let odd = OddSpec {
            min_solo_age: 10,
            ..OddSpec::default()
        };
        match accept_mission(&obj("C"), &[kid], &odd, &w, &BTreeSet::new()) {
            Err(AcceptError::Rejected(v)) => assert_eq!(v.dimensions(), [Dimension::MinAge].into()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn goal_here_is_trivial() {
        let w = world("A");
        let p = accept_mission(
            &obj("A"),
            &[PassengerProfile::adult("p1")],
            &OddSpec::default(),
            &w,
            &BTreeSet::new(),
        )
        .unwrap();
        assert_eq!(p.route, vec![NodeId::new("A")]);
        assert_eq!(w.travel_time(&"A".into()), Some(0.0));
    }

    fn medical_at_b() -> (StrategyPlan, WorldModel, Vec<Hazard>) {
        let mut w = world("A");
        w.planning_node = "B".into();
        w.tick = Tick(300_000);
        w.passenger_projection.insert(
            "p1".into(),
            PassengerProjection {
                health_trend: HealthTrend::Critical,
                max_remaining_onboard_time: 0.0,
            },
        );
        let plan = StrategyPlan {
            action: Action::Continue,
            goal_node: "C".into(),
            route: vec!["A".into(), "B".into(), "C".into()],
            alert: None,
            rationale: vec![],
        };
        let h = vec![Hazard {
            kind: HazardKind::MedicalEmergency,
            subject: "p1".into(),
            severity: 3,
            evidence: vec![FeatureKind::HeartRate],
        }];
        (plan, w, h)
    }

    #[test]
    fn medical_emergency_diverts_to_care() {
        let (plan, w, h) = medical_at_b();
        let out = replan(&plan, &w, &h, &nominal());
        assert_eq!(out.action, Action::Divert);
        assert_eq!(out.goal_node, NodeId::new("H"));
        assert_eq!(out.route, vec![NodeId::new("B"), "H".into()]);
        assert_eq!(out.alert.as_ref().unwrap().recipient, Recipient::Rescue);
    }

    #[test]
    fn traffic_at_goal_keeps_the_plan_going() {
        let (plan, w, _) = medical_at_b();
        let perf = PerformanceReport::degraded(Level::Tactical, vec![ReasonCode::DoorBlockedByTraffic]);
        let out = replan(&plan, &w, &[], &perf);
        assert_eq!(out.action, Action::Continue);
        assert_eq!(out.goal_node, plan.goal_node);
        assert!(out.alert.is_none());
    }

    #[test]
    fn nothing_wrong_changes_nothing() {
        let (plan, w, _) = medical_at_b();
        assert_eq!(replan(&plan, &w, &[], &nominal()), plan);
    }

    #[test]
    fn actuator_failure_forces_a_stop() {
        let (plan, w, _) = medical_at_b();
        let h = vec![Hazard {
            kind: HazardKind::TrappedRisk,
            subject: "p1".into(),
            severity: 2,
            evidence: vec![FeatureKind::DoorPosition],
        }];
        let perf = PerformanceReport::failed(
            Level::Operational,
            vec![ReasonCode::ActuatorFault(crate::operational::commands::Subsystem::Door)],
        );
        let out = replan(&plan, &w, &h, &perf);
        assert_eq!(out.action, Action::StopImmediately);
        assert!(out.route.is_empty());
        assert_eq!(out.alert.unwrap().recipient, Recipient::ControlRoom);
    }
}
