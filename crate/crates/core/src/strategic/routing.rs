//! Minimum-travel-time routing with node/edge exclusions.

use crate::ids::NodeId;
use crate::plant::map::RoadGraph;
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub nodes: Vec<NodeId>,
    pub cost_s: u64,
}

impl Route {
    pub fn trivial(at: NodeId) -> Self {
        Route {
            nodes: vec![at],
            cost_s: 0,
        }
    }

    pub fn goal(&self) -> &NodeId {
        self.nodes.last().expect("route is never empty")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteConstraints {
    #[serde(default)]
    pub excluded_nodes: BTreeSet<NodeId>,
    /// Unordered pairs; either orientation blocks the edge.
    #[serde(default)]
    pub excluded_edges: BTreeSet<(NodeId, NodeId)>,
    #[serde(default)]
    pub max_duration: Option<u64>,
}

impl RouteConstraints {
    pub fn edge_excluded(&self, a: &NodeId, b: &NodeId) -> bool {
        self.excluded_edges.contains(&(a.clone(), b.clone())) || self.excluded_edges.contains(&(b.clone(), a.clone()))
    }

    /// True iff `nodes` is a legal walk under these exclusions (the first node
    /// is where the vehicle already is and is exempt).
    pub fn admits(&self, nodes: &[NodeId]) -> bool {
        nodes.iter().skip(1).all(|n| !self.excluded_nodes.contains(n))
            && nodes.windows(2).all(|w| !self.edge_excluded(&w[0], &w[1]))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RouteError {
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("no route from `{from}` to `{to}`")]
    NoRoute { from: NodeId, to: NodeId },
    #[error("cheapest route takes {cost_s} s, limit is {max_s} s")]
    DurationExceeded { cost_s: u64, max_s: u64 },
}

/// Cheapest path from `from` to `to`. Equal-cost paths are broken by the
/// lexicographically smallest node-id sequence.
pub fn plan_route(
    map: &RoadGraph,
    from: &NodeId,
    to: &NodeId,
    constraints: &RouteConstraints,
) -> Result<Route, RouteError> {
    for n in [from, to] {
        if !map.contains(n) {
            return Err(RouteError::UnknownNode(n.clone()));
        }
    }
    let no_route = || RouteError::NoRoute {
        from: from.clone(),
        to: to.clone(),
    };
    if from != to && constraints.excluded_nodes.contains(to) {
        return Err(no_route());
    }

    // Labels are (cost, path) and compared lexicographically; with positive
    // edge costs every label is final once popped.
    let mut best: BTreeMap<NodeId, (u64, Vec<NodeId>)> = BTreeMap::new();
    let mut settled: BTreeSet<NodeId> = BTreeSet::new();
    let mut heap = BinaryHeap::new();
    best.insert(from.clone(), (0, vec![from.clone()]));
    heap.push(Reverse((0u64, vec![from.clone()])));

    while let Some(Reverse((cost, path))) = heap.pop() {
        let here = path.last().unwrap().clone();
        if settled.contains(&here) || best.get(&here) != Some(&(cost, path.clone())) {
            continue;
        }
        settled.insert(here.clone());
        if &here == to {
            return match constraints.max_duration {
                Some(max_s) if cost > max_s => Err(RouteError::DurationExceeded { cost_s: cost, max_s }),
                _ => Ok(Route {
                    nodes: path,
                    cost_s: cost,
                }),
            };
        }
        for (next, travel) in map.neighbors(&here) {
            if settled.contains(next)
                || constraints.excluded_nodes.contains(next)
                || constraints.edge_excluded(&here, next)
            {
                continue;
            }
            let mut cand_path = path.clone();
            cand_path.push(next.clone());
            let cand = (cost + travel, cand_path);
            let better = best.get(next).is_none_or(|cur| cand < *cur);
            if better {
                best.insert(next.clone(), cand.clone());
                heap.push(Reverse(cand));
            }
        }
    }
    Err(no_route())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::map::reference_graph;

    fn ids(s: &[&str]) -> Vec<NodeId> {
        s.iter().map(|&x| NodeId::new(x)).collect()
    }

    #[test]
    fn reference_a_to_c() {
        let g = reference_graph();
        let r = plan_route(&g, &"A".into(), &"C".into(), &RouteConstraints::default()).unwrap();
        assert_eq!(r.nodes, ids(&["A", "B", "C"]));
        assert_eq!(r.cost_s, 600);
    }

    #[test]
    fn reference_a_to_c_avoiding_b() {
        let g = reference_graph();
        let mut c = RouteConstraints::default();
        c.excluded_nodes.insert("B".into());
        let r = plan_route(&g, &"A".into(), &"C".into(), &c).unwrap();
        assert_eq!(r.nodes, ids(&["A", "D", "C"]));
        assert_eq!(r.cost_s, 1200);
        c.max_duration = Some(900);
        assert_eq!(
            plan_route(&g, &"A".into(), &"C".into(), &c),
            Err(RouteError::DurationExceeded {
                cost_s: 1200,
                max_s: 900
            })
        );
    }

    #[test]
    fn same_node_is_trivial() {
        let g = reference_graph();
        let r = plan_route(&g, &"C".into(), &"C".into(), &RouteConstraints::default()).unwrap();
        assert_eq!(r, Route::trivial("C".into()));
    }

    #[test]
    fn unreachable_and_unknown() {
        let g = reference_graph();
        let mut c = RouteConstraints::default();
        c.excluded_edges.insert(("H".into(), "B".into()));
        assert!(matches!(
            plan_route(&g, &"A".into(), &"H".into(), &c),
            Err(RouteError::NoRoute { .. })
        ));
        assert_eq!(
            plan_route(&g, &"A".into(), &"Q".into(), &RouteConstraints::default()),
            Err(RouteError::UnknownNode("Q".into()))
        );
    }

    #[test]
    fn equal_cost_tie_breaks_lexicographically() {
        use crate::plant::map::{Edge, Node};
        let nodes = ["S", "X", "M", "T"].iter().map(|n| Node::new(n, 0.0, 0.0)).collect();
        let edges = vec![
            Edge::new("S", "X", 5),
            Edge::new("X", "T", 5),
            Edge::new("S", "M", 5),
            Edge::new("M", "T", 5),
        ];
        let g = RoadGraph::new(nodes, edges, vec![]).unwrap();
        let r = plan_route(&g, &"S".into(), &"T".into(), &RouteConstraints::default()).unwrap();
        assert_eq!(r.nodes, ids(&["S", "M", "T"]));
    }
}
