use escort::ids::NodeId;
use escort::odd::{check_mission, check_runtime, Capability, MissionContext, OddSpec, PassengerProfile};
use escort::plant::map::{reference_graph, Edge, Node, RoadGraph};
use escort::representation::hazards::{dominant, Hazard, HazardKind};
use escort::representation::world::WorldModel;
use escort::strategic::routing::{plan_route, Route, RouteConstraints, RouteError};
use escort::strategic::{replan, Action, MissionObjective, Recipient, Requester, StrategyPlan, Urgency};
use escort::tactical::{Level, PerformanceReport, ReasonCode};
use proptest::prelude::*;
use std::collections::BTreeSet;

const NAMES: [&str; 8] = ["N0", "N1", "N2", "N3", "N4", "N5", "N6", "N7"];
const G0: [&str; 5] = ["A", "B", "C", "D", "H"];

fn arb_graph() -> impl Strategy<Value = RoadGraph> {
    (2usize..=8)
        .prop_flat_map(|n| (Just(n), proptest::collection::btree_map((0..n, 0..n), 1u64..50, 0..16)))
        .prop_map(|(n, raw)| {
            let nodes = (0..n).map(|i| Node::new(NAMES[i], i as f64 * 100.0, 0.0)).collect();
            let mut seen = BTreeSet::new();
            let edges = raw
                .into_iter()
                .filter(|((a, b), _)| a != b && seen.insert((*a.min(b), *a.max(b))))
                .map(|((a, b), w)| Edge::new(NAMES[a], NAMES[b], w))
                .collect();
            RoadGraph::new(nodes, edges, vec![]).unwrap()
        })
}

fn arb_constraints() -> impl Strategy<Value = RouteConstraints> {
    (
        proptest::collection::btree_set(0usize..8, 0..3),
        proptest::collection::btree_set((0usize..8, 0usize..8), 0..4),
    )
        .prop_map(|(nodes, edges)| RouteConstraints {
            excluded_nodes: nodes.into_iter().map(|i| NodeId::new(NAMES[i])).collect(),
            excluded_edges: edges
                .into_iter()
                .map(|(a, b)| (NAMES[a].into(), NAMES[b].into()))
                .collect(),
            max_duration: None,
        })
}

fn legal(map: &RoadGraph, r: &Route, from: &NodeId, to: &NodeId, c: &RouteConstraints) -> bool {
    let hops: Option<u64> = r.nodes.windows(2).map(|w| map.travel_s(&w[0], &w[1])).sum();
    r.nodes.first() == Some(from) && r.goal() == to && c.admits(&r.nodes) && hops == Some(r.cost_s)
}

fn hazard(kind: usize, severity: u8) -> Hazard {
    let kinds = [
        HazardKind::MedicalEmergency,
        HazardKind::TrappedRisk,
        HazardKind::StrandingRisk,
        HazardKind::ExposureRisk,
        HazardKind::UnknownAreaRisk,
    ];
    Hazard {
        kind: kinds[kind],
        subject: "p1".into(),
        severity,
        evidence: vec![],
    }
}

fn arb_hazards() -> impl Strategy<Value = Vec<Hazard>> {
    proptest::collection::vec((0usize..5, 1u8..=3), 0..3)
        .prop_map(|hs| hs.into_iter().map(|(k, s)| hazard(k, s)).collect())
}

fn arb_perf() -> impl Strategy<Value = PerformanceReport> {
    prop_oneof![
        Just(PerformanceReport::nominal(Level::Tactical)),
        Just(PerformanceReport::degraded(
            Level::Tactical,
            vec![ReasonCode::DoorBlockedByTraffic]
        )),
        Just(PerformanceReport::degraded(
            Level::Tactical,
            vec![ReasonCode::NoSuitableStop]
        )),
        Just(PerformanceReport::failed(
            Level::Tactical,
            vec![ReasonCode::EmergencyStopRequested]
        )),
    ]
}

/// Parked at `at` on a riding mission from A to `goal`.
fn world_at(map: RoadGraph, at: &str, goal: &str, range_m: f64) -> (WorldModel, StrategyPlan) {
    let mut w = WorldModel::new(map, vec![PassengerProfile::adult("p1")], "A".into(), range_m, vec![]);
    w.planning_node = at.into();
    w.mission_goal = goal.into();
    let route = plan_route(&w.map, &w.planning_node, &w.mission_goal, &w.constraints())
        .map(|r| r.nodes)
        .unwrap_or_default();
    let plan = StrategyPlan {
        action: Action::Continue,
        goal_node: goal.into(),
        route,
        alert: None,
        rationale: vec![],
    };
    (w, plan)
}

proptest! {
    #[test]
    fn routes_are_legal_and_scale_with_travel_time(
        g in arb_graph(), from in 0usize..8, to in 0usize..8, c in arb_constraints(), k in 1u64..=5,
    ) {
        let (from, to) = (NodeId::new(NAMES[from]), NodeId::new(NAMES[to]));
        let base = plan_route(&g, &from, &to, &c);
        let scaled = plan_route(&g.scaled(k), &from, &to, &c);
        match (&base, &scaled) {
            (Ok(r), Ok(s)) => {
                prop_assert!(legal(&g, r, &from, &to, &c));
                prop_assert_eq!(&s.nodes, &r.nodes);
                prop_assert_eq!(s.cost_s, r.cost_s * k);
            }
            (Err(RouteError::UnknownNode(_)), _) => prop_assert!(!g.contains(&from) || !g.contains(&to)),
            (Err(a), Err(b)) => prop_assert_eq!(a, b),
            _ => prop_assert!(false, "scaling changed feasibility: {:?} vs {:?}", base, scaled),
        }
    }

    #[test]
    fn replan_choice_is_invariant_under_time_scaling(
        at in 0usize..5, goal in 0usize..5, hazards in arb_hazards(), perf in arb_perf(), k in 1u64..=5,
    ) {
        let (w1, p1) = world_at(reference_graph(), G0[at], G0[goal], 5e4);
        let (wk, pk) = world_at(reference_graph().scaled(k), G0[at], G0[goal], 5e4);
        let a = replan(&p1, &w1, &hazards, &perf);
        let b = replan(&pk, &wk, &hazards, &perf);
        prop_assert_eq!((a.action, &a.goal_node, &a.route), (b.action, &b.goal_node, &b.route));
        prop_assert_eq!(a.alert, b.alert);
    }

    #[test]
    fn replan_stays_in_the_closed_world(
        at in 0usize..5, goal in 0usize..5, hazards in arb_hazards(), perf in arb_perf(),
        range in prop_oneof![Just(500.0), Just(5e3), Just(5e4)],
    ) {
        let (w, plan) = world_at(reference_graph(), G0[at], G0[goal], range);
        let out = replan(&plan, &w, &hazards, &perf);
        prop_assert!(w.map.contains(&out.goal_node));
        if hazards.is_empty() && perf.status == escort::tactical::Status::Nominal {
            prop_assert_eq!(out, plan);
            return Ok(());
        }

        prop_assert_eq!(out.rationale.len(), 4);
        let best = out.rationale.iter().filter(|o| o.feasible).map(|o| &o.score).min().unwrap();
        let chosen = out.rationale.iter().find(|o| o.action == out.action && o.feasible).unwrap();
        prop_assert_eq!(&chosen.score, best);
        if out.action == Action::StopImmediately {
            prop_assert!(out.route.is_empty());
            prop_assert_eq!(&out.goal_node, &w.planning_node);
        } else {
            prop_assert_eq!(out.route.first(), Some(&w.planning_node));
            prop_assert_eq!(out.route.last(), Some(&out.goal_node));
            prop_assert!(w.constraints().admits(&out.route));
            prop_assert!(out.route.windows(2).all(|e| w.map.travel_s(&e[0], &e[1]).is_some()));
        }

        match dominant(&hazards).filter(|h| h.severity >= 2) {
            None => prop_assert!(out.alert.is_none()),
            Some(h) => {
                let alert = out.alert.expect("severe hazard alerts");
                prop_assert_eq!(&alert.hazard, h);
                prop_assert_eq!(&alert.node, &w.planning_node);
                let rescue = h.kind == HazardKind::MedicalEmergency;
                prop_assert_eq!(alert.recipient == Recipient::Rescue, rescue);
            }
        }
    }

    #[test]
    fn tightening_the_odd_never_clears_a_violation(
        age in 5u32..40, caps in proptest::collection::btree_set(0usize..3, 0..3),
        goal in 0usize..5, storm in any::<bool>(), odometer in 0.0f64..2e4, elapsed in 0.0f64..4e3,
        min_age_up in 0u32..10, need_cap in proptest::option::of(0usize..3), exclude in proptest::option::of(0usize..5),
        duration_down in 0u64..3000, distance_down in 0.0f64..1e4, drop_rain in any::<bool>(),
    ) {
        let all_caps = [Capability::CanClimbStep, Capability::CanOperateManualRelease, Capability::CanOperateHmi];
        let mut p = PassengerProfile::adult("p1");
        p.age = age;
        p.capabilities = caps.iter().map(|&i| all_caps[i]).collect();
        let loose = OddSpec {
            min_solo_age: 6,
            max_trip_duration: 3_600,
            max_trip_distance: 2e4,
            ..OddSpec::default()
        };
        let mut tight = loose.clone();
        tight.min_solo_age += min_age_up;
        tight.required_capabilities_solo.extend(need_cap.map(|i| all_caps[i]));
        tight.excluded_nodes.extend(exclude.map(|i| NodeId::new(G0[i])));
        tight.max_trip_duration = (tight.max_trip_duration - duration_down).max(1);
        tight.max_trip_distance -= distance_down;
        if drop_rain {
            tight.env_conditions.remove("RAIN");
        }

        let map = reference_graph();
        let env: BTreeSet<String> = [if storm { "STORM" } else { "RAIN" }.to_string()].into();
        let route = plan_route(&map, &"A".into(), &G0[goal].into(), &RouteConstraints::default()).unwrap();
        let obj = MissionObjective {
            goal_node: G0[goal].into(),
            manifest: vec!["p1".into()],
            urgency: Urgency::Normal,
            requester: Requester::Passenger,
            deadline: None,
        };
        let ctx = MissionContext { map: &map, env_flags: &env, nearest_assistant_m: None };
        let profiles = [p.clone()];
        let before: BTreeSet<_> = check_mission(&loose, &obj, &profiles, &route, &ctx).violations.into_iter().collect();
        let after: BTreeSet<_> = check_mission(&tight, &obj, &profiles, &route, &ctx).violations.into_iter().collect();
        prop_assert!(before.is_subset(&after), "{:?} lost from {:?}", before, after);

        let mut w = WorldModel::new(map.clone(), vec![p], "A".into(), 5e4, vec![]);
        w.odometer_m = odometer;
        let before: BTreeSet<_> = check_runtime(&loose, &w, elapsed, &env).violations.into_iter().collect();
        let after: BTreeSet<_> = check_runtime(&tight, &w, elapsed, &env).violations.into_iter().collect();
        prop_assert!(before.is_subset(&after), "{:?} lost from {:?}", before, after);
    }
}

#[test]
fn scaled_reference_graph_keeps_its_shape() {
    let g = reference_graph();
    let s = g.scaled(3);
    assert_eq!(s.nodes(), g.nodes());
    for (a, b) in g.edges().iter().zip(s.edges()) {
        assert_eq!(b.travel_s, a.travel_s * 3);
    }
}
