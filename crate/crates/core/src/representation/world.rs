//! World model: the long-horizon view used by the strategic level.

use crate::ids::{NodeId, PassengerId, Tick};
use crate::odd::{profile_of, PassengerProfile};
use crate::plant::map::{RoadGraph, NOMINAL_SPEED_MPS};
use crate::plant::vehicle::Position;
use crate::representation::situation::{Health, SituationModel};
use crate::strategic::routing::{plan_route, Route, RouteConstraints};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HealthTrend {
    Stable,
    Degrading,
    Critical,
}

impl From<Health> for HealthTrend {
    fn from(h: Health) -> Self {
        match h {
            Health::Normal => HealthTrend::Stable,
            Health::Elevated => HealthTrend::Degrading,
            Health::Emergency => HealthTrend::Critical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassengerProjection {
    pub health_trend: HealthTrend,
    /// Seconds the passenger may still stay onboard.
    pub max_remaining_onboard_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    pub tick: Tick,
    pub map: RoadGraph,
    pub profiles: Vec<PassengerProfile>,
    pub range_remaining: f64,
    pub odometer_m: f64,
    /// Seconds to the active route's goal; present iff a route is active.
    pub eta_current_goal: Option<f64>,
    pub active_route: Option<Route>,
    /// Node plans start from: the current node, or the one being approached.
    pub planning_node: NodeId,
    /// Time and distance still needed to reach `planning_node`.
    pub lead_time_s: f64,
    pub lead_m: f64,
    pub passenger_projection: BTreeMap<PassengerId, PassengerProjection>,
    /// ODD node exclusions fixed at mission acceptance.
    pub excluded_nodes: BTreeSet<NodeId>,
    pub blocked_edges: BTreeSet<(NodeId, NodeId)>,
    pub departure_node: NodeId,
    pub mission_goal: NodeId,
    /// Scripted assistant positions.
    pub assistants: Vec<(f64, f64)>,
    pub nearest_assistant_m: Option<f64>,
}

impl WorldModel {
    pub fn new(
        map: RoadGraph,
        profiles: Vec<PassengerProfile>,
        at: NodeId,
        range_m: f64,
        assistants: Vec<(f64, f64)>,
    ) -> Self {
        let xy = map.node(&at).map(|n| (n.x, n.y)).unwrap_or_default();
        WorldModel {
            tick: Tick::ZERO,
            range_remaining: range_m,
            odometer_m: 0.0,
            eta_current_goal: None,
            active_route: None,
            planning_node: at.clone(),
            lead_time_s: 0.0,
            lead_m: 0.0,
            passenger_projection: BTreeMap::new(),
            excluded_nodes: BTreeSet::new(),
            blocked_edges: BTreeSet::new(),
            departure_node: at.clone(),
            mission_goal: at,
            nearest_assistant_m: nearest(&assistants, xy),
            assistants,
            map,
            profiles,
        }
    }

    #[cfg(test)]
    pub(crate) fn for_tests(map: RoadGraph) -> Self {
        WorldModel::new(map, vec![PassengerProfile::adult("p1")], NodeId::new("A"), 1e5, vec![])
    }

    /// Exclusions for any plan made from this model.
    pub fn constraints(&self) -> RouteConstraints {
        RouteConstraints {
            excluded_nodes: self.excluded_nodes.clone(),
            excluded_edges: self.blocked_edges.clone(),
            max_duration: None,
        }
    }

    pub fn onboard(&self) -> impl Iterator<Item = &PassengerId> {
        self.passenger_projection.keys()
    }

    pub fn platform_user_onboard(&self) -> bool {
        self.onboard()
            .any(|id| profile_of(&self.profiles, id).is_some_and(|p| p.needs_platform))
    }

    /// Travel time from the planning node, lead included.
    pub fn travel_time(&self, to: &NodeId) -> Option<f64> {
        plan_route(&self.map, &self.planning_node, to, &self.constraints())
            .ok()
            .map(|r| self.lead_time_s + r.cost_s as f64)
    }
}

fn nearest(assistants: &[(f64, f64)], (x, y): (f64, f64)) -> Option<f64> {
    assistants
        .iter()
        .map(|(ax, ay)| ((ax - x).powi(2) + (ay - y).powi(2)).sqrt())
        .min_by(|a, b| a.total_cmp(b))
}

/// Abstracts the current scene into the long-horizon model. Everything is
/// recomputed from `sit` and the stored profiles, so applying the same scene
/// twice changes nothing.
pub fn update_world_model(prev: &WorldModel, sit: &SituationModel, tick: Tick) -> WorldModel {
    let mut w = prev.clone();
    w.tick = tick;
    let me = &sit.self_representation;
    w.range_remaining = me.range_m.max(0.0);
    w.odometer_m = me.odometer_m;
    w.planning_node = me.next_node.clone();
    w.lead_m = me.remaining_m;
    w.lead_time_s = me.remaining_m / NOMINAL_SPEED_MPS;
    w.blocked_edges = sit.scenery.blocked_edges.clone();

    let xy = match &me.position {
        Position::AtNode { node } => w.map.node(node).map(|n| (n.x, n.y)),
        Position::OnEdge { from, to, along_m } => w.map.interpolate(from, to, *along_m),
    };
    w.nearest_assistant_m = xy.and_then(|xy| nearest(&w.assistants, xy));

    w.passenger_projection = sit
        .onboard()
        .filter_map(|a| {
            let id = a.passenger_id()?;
            let profile = profile_of(&w.profiles, id)?;
            let trend = HealthTrend::from(a.health);
            let onboard_s = a.onboard_since.map_or(0.0, |t| tick.since(t) as f64 / 1000.0);
            let left = match trend {
                HealthTrend::Critical => 0.0,
                _ => (profile.max_ride_duration as f64 - onboard_s).max(0.0),
            };
            Some((
                id.clone(),
                PassengerProjection {
                    health_trend: trend,
                    max_remaining_onboard_time: left,
                },
            ))
        })
        .collect();

    w.eta_current_goal = w.active_route.as_ref().map(|r| {
        let suffix = match r.nodes.iter().position(|n| n == &w.planning_node) {
            Some(i) => r.nodes[i..]
                .windows(2)
                .filter_map(|p| w.map.travel_s(&p[0], &p[1]))
                .sum::<u64>(),
            None => r.cost_s,
        };
        w.lead_time_s + suffix as f64
    });
    w
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateProjection {
    pub route: Route,
    /// Seconds to arrive, including the lead to the planning node.
    pub travel_time: f64,
    pub distance_m: f64,
    pub arrival_health: BTreeMap<PassengerId, HealthTrend>,
    pub range_feasible: bool,
    pub within_horizon: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldProjection {
    pub horizon_s: f64,
    pub from: NodeId,
    pub candidates: BTreeMap<NodeId, CandidateProjection>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictError {
    #[error("projection horizon must be positive, got {0}")]
    NonPositiveHorizon(f64),
}

/// Nodes worth driving to: every node with a stop, restricted to
/// platform-suitable ones while a platform user rides, plus the mission's
/// own departure and goal.
pub fn goal_candidates(w: &WorldModel) -> BTreeSet<NodeId> {
    let platform = w.platform_user_onboard();
    let mut out: BTreeSet<NodeId> = w
        .map
        .nodes()
        .iter()
        .filter(|n| {
            let stops = w.map.stops_at(&n.id);
            !stops.is_empty() && (!platform || (n.suitable_for_platform && stops.iter().any(|s| s.platform_usable)))
        })
        .map(|n| n.id.clone())
        .collect();
    out.insert(w.departure_node.clone());
    out.insert(w.mission_goal.clone());
    out
}

/// Arrival outlook for one passenger after `travel_time` more seconds.
pub fn arrival_trend(p: &PassengerProjection, travel_time: f64) -> HealthTrend {
    if p.health_trend == HealthTrend::Critical || travel_time > p.max_remaining_onboard_time {
        HealthTrend::Critical
    } else {
        p.health_trend
    }
}

/// Projects every reachable candidate goal. Unreachable ones are left out.
pub fn predict_world(w: &WorldModel, horizon_s: f64) -> Result<WorldProjection, PredictError> {
    if !(horizon_s > 0.0) {
        return Err(PredictError::NonPositiveHorizon(horizon_s));
    }
    let constraints = w.constraints();
    let candidates = goal_candidates(w)
        .into_iter()
        .filter_map(|goal| {
            let route = plan_route(&w.map, &w.planning_node, &goal, &constraints).ok()?;
            let travel_time = w.lead_time_s + route.cost_s as f64;
            let distance_m = w.lead_m + w.map.path_length_m(&route.nodes)?;
            let arrival_health = w
                .passenger_projection
                .iter()
                .map(|(id, p)| (id.clone(), arrival_trend(p, travel_time)))
                .collect();
            Some((
                goal,
                CandidateProjection {
                    route,
                    travel_time,
                    distance_m,
                    arrival_health,
                    range_feasible: distance_m <= w.range_remaining,
                    within_horizon: travel_time <= horizon_s,
                },
            ))
        })
        .collect();
    Ok(WorldProjection {
        horizon_s,
        from: w.planning_node.clone(),
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::map::reference_graph;
    use crate::plant::vehicle::VehicleState;
    use crate::representation::situation::{Scenery, SelfRepresentation, Zone};
    use proptest::prelude::*;

    fn sit_at(node: &str, health: Health, onboard_since: Tick, tick: Tick) -> SituationModel {
        let map = reference_graph();
        let v = VehicleState::parked_at(node.into(), Some(1), 5e4);
        let mut s = SituationModel::new(
            onboard_since,
            Scenery::from_map(&map, BTreeMap::new()),
            SelfRepresentation::from_vehicle(&v, &map),
            [(PassengerId::new("p1"), Zone::CabinSeated)],
        );
        s.actors[0].health = health;
        s.tick = tick;
        s
    }

    fn world() -> WorldModel {
        let mut p = PassengerProfile::adult("p1");
        p.max_ride_duration = 1800;
        WorldModel::new(reference_graph(), vec![p], "A".into(), 5e4, vec![])
    }

    #[test]
    fn emergency_is_critical_with_no_time_left() {
        let w = update_world_model(
            &world(),
            &sit_at("A", Health::Emergency, Tick(0), Tick(1000)),
            Tick(1000),
        );
        let p = &w.passenger_projection[&PassengerId::new("p1")];
        assert_eq!(p.health_trend, HealthTrend::Critical);
        assert_eq!(p.max_remaining_onboard_time, 0.0);
    }

    #[test]
    fn countdown_from_ride_limit() {
        let t = Tick::from_secs(600.0);
        let w = update_world_model(&world(), &sit_at("A", Health::Elevated, Tick(0), t), t);
        let p = &w.passenger_projection[&PassengerId::new("p1")];
        assert_eq!(p.health_trend, HealthTrend::Degrading);
        // 1800 s allowed, 600 s spent.
        assert_eq!(p.max_remaining_onboard_time, 1800.0 - 600.0);
    }

    #[test]
    fn stationary_update_only_moves_time() {
        let s0 = sit_at("A", Health::Normal, Tick(0), Tick(0));
        let w0 = update_world_model(&world(), &s0, Tick(0));
        let mut s1 = s0.clone();
        s1.tick = Tick(0);
        let w1 = update_world_model(&w0, &s1, Tick(0));
        assert_eq!(w0, w1);
    }

    /// Shortest B→H time over all simple paths, enumerated directly.
    fn brute_force(map: &RoadGraph, from: &NodeId, to: &NodeId) -> Option<u64> {
        fn go(map: &RoadGraph, at: &NodeId, to: &NodeId, seen: &mut Vec<NodeId>, cost: u64, best: &mut Option<u64>) {
            if at == to {
                *best = Some(best.map_or(cost, |b: u64| b.min(cost)));
                return;
            }
            for (n, t) in map.neighbors(at) {
                if !seen.contains(n) {
                    seen.push(n.clone());
                    go(map, n, to, seen, cost + t, best);
                    seen.pop();
                }
            }
        }
        let mut best = None;
        go(map, from, to, &mut vec![from.clone()], 0, &mut best);
        best
    }

    #[test]
    fn h_from_b_is_120() {
        let w = update_world_model(&world(), &sit_at("B", Health::Normal, Tick(0), Tick(0)), Tick(0));
        let proj = predict_world(&w, 3600.0).unwrap();
        let expected = brute_force(&w.map, &"B".into(), &"H".into()).unwrap();
        assert_eq!(expected, 120);
        assert_eq!(proj.candidates[&NodeId::new("H")].travel_time, expected as f64);
    }

    #[test]
    fn short_horizon_flags_every_goal() {
        let w = update_world_model(&world(), &sit_at("A", Health::Normal, Tick(0), Tick(0)), Tick(0));
        let proj = predict_world(&w, 1.0).unwrap();
        assert!(proj
            .candidates
            .iter()
            .filter(|(g, _)| g.as_str() != "A")
            .all(|(_, c)| !c.within_horizon));
        assert!(predict_world(&w, 0.0).is_err());
    }

    #[test]
    fn empty_battery_grounds_every_move() {
        let mut s = sit_at("A", Health::Normal, Tick(0), Tick(0));
        s.self_representation.range_m = 0.0;
        let w = update_world_model(&world(), &s, Tick(0));
        let proj = predict_world(&w, 3600.0).unwrap();
        for (g, c) in &proj.candidates {
            assert_eq!(c.range_feasible, c.distance_m == 0.0, "{g}");
        }
        assert!(proj
            .candidates
            .iter()
            .filter(|(g, _)| g.as_str() != "A")
            .all(|(_, c)| !c.range_feasible));
    }

    proptest! {
        #[test]
        fn update_is_idempotent(node in prop_oneof![Just("A"), Just("B"), Just("C")],
                                h in prop_oneof![Just(Health::Normal), Just(Health::Elevated), Just(Health::Emergency)],
                                t in 0u64..4_000_000, range in 0.0f64..1e5) {
            let mut s = sit_at(node, h, Tick(0), Tick(t));
            s.self_representation.range_m = range;
            let mut w = world();
            w.active_route = Some(Route { nodes: vec!["A".into(), "B".into(), "C".into()], cost_s: 600 });
            let once = update_world_model(&w, &s, Tick(t));
            let twice = update_world_model(&once, &s, Tick(t));
            prop_assert_eq!(&once, &twice);
            prop_assert!(once.range_remaining >= 0.0);
            prop_assert_eq!(once.eta_current_goal.is_some(), once.active_route.is_some());
        }
    }
}
